"""Command-line front end.

Every subcommand loads the leaderboard, fits (or reads) the factor model
and hands off to the library. Exit status is 0 on success, 1 for numerical
or runtime failures and 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import applications, diagnostics, labeling, novelty, stability
from .config import RunConfig
from .data import correlation_matrix, load_leaderboard, standardize
from .errors import AlignmentError, InputError, ParseError, SkillSpaceError, ValidationError
from .paf import FactorModel, correlation_eigenvalues, explained_variance, fit_paf, rotate_orthomax, select_factor_count
from .scores import regression_weights, score_models

log = logging.getLogger("skillspace")

COMMANDS = ("fit", "scores", "reliability", "stability", "novelty", "profile", "select", "label")


# ---------------------------------------------------------------- plumbing


def _write_json(path: Path, command: str, cfg: RunConfig, result) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "config": cfg.to_dict(), "result": result}
    path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n", encoding="utf-8")
    return path


def read_pairs(path, what: str) -> tuple[list[str], np.ndarray]:
    """Two-column CSV of ``id,value``; a non-numeric first row is a header."""
    path = Path(path)
    ids, vals = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for n, row in enumerate(csv.reader(fh), 1):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields ({what} id, value), found {len(row)}", row=n, path=path)
            try:
                v = float(row[1])
            except ValueError:
                if n == 1:
                    continue
                raise ParseError(f"not a number: {row[1]!r}", row=n, column=2, path=path) from None
            if not math.isfinite(v):
                raise ParseError(f"not a finite number: {row[1]!r}", row=n, column=2, path=path)
            ids.append(row[0].strip())
            vals.append(v)
    if not ids:
        raise ParseError("no data rows", path=path)
    if len(set(ids)) != len(ids):
        raise ParseError(f"duplicate {what} id", path=path)
    return ids, np.array(vals)


class Session:
    """Lazily built pipeline state shared by the subcommands."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        if not cfg.input:
            raise ValidationError("no --input leaderboard given")
        self.pm = load_leaderboard(cfg.input)
        self.z = standardize(self.pm, cfg.missing_policy)
        self.r = correlation_matrix(self.z)
        self._fm = None

    @property
    def n_factors(self) -> int:
        fixed = self.cfg.n_factors_fixed()
        if fixed is not None:
            return fixed
        c = select_factor_count(correlation_eigenvalues(self.r), self.cfg.cum_var_threshold)
        return min(c, self.r.n_tasks - 1)

    @property
    def fm(self) -> FactorModel:
        if self._fm is None:
            if self.cfg.model:
                fm = FactorModel.from_json(Path(self.cfg.model).read_text(encoding="utf-8"))
                if fm.task_ids != tuple(self.z.task_ids):
                    raise AlignmentError(f"{self.cfg.model}: task ids differ from {self.cfg.input}")
            else:
                fm = fit_paf(self.r, self.n_factors, tol=self.cfg.tol, max_iter=self.cfg.max_iter)
                fm = rotate_orthomax(fm, self.cfg.gamma, self.cfg.kaiser_normalize)
            self._fm = fm
        return self._fm

    @property
    def theta(self):
        return score_models(regression_weights(self.fm, self.r), self.z)

    def k(self) -> int | None:
        return self.cfg.k_fixed()


def _variance_table(fm: FactorModel) -> str:
    per, cum = explained_variance(fm)
    lines = [f"{'factor':<8} {'ss_load':>8} {'var':>7} {'cum':>7}"]
    for c, (p, q) in enumerate(zip(per, cum), 1):
        lines.append(f"{c:<8} {p * fm.n_tasks:>8.3f} {p:>7.3f} {q:>7.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------- commands


def cmd_fit(cfg: RunConfig, args) -> str:
    s = Session(cfg.replace(model=""))
    fm = s.fm
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(fm.to_json() + "\n", encoding="utf-8")
    per, cum = explained_variance(fm)
    _write_json(
        out / "fit.json",
        "fit",
        cfg,
        {
            "n_factors": fm.n_factors,
            "factor_rule": "fixed" if cfg.n_factors_fixed() else "auto",
            "correlation_eigenvalues": [float(v) for v in correlation_eigenvalues(s.r)],
            "explained_variance": [float(v) for v in per],
            "cumulative_variance": [float(v) for v in cum],
            "model": fm.to_dict(),
        },
    )
    return _variance_table(fm)


def cmd_scores(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    theta = s.theta
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    theta.write_csv(out / "scores.csv")
    var = diagnostics.skill_variability(theta) if theta.factor_count > 1 else np.zeros(len(theta.model_ids))
    proj = diagnostics.pca_project_2d(theta) if theta.factor_count > 1 else None
    if proj is not None:
        proj.write_csv(out / "projection.csv")
    _write_json(
        out / "scores.json",
        "scores",
        cfg,
        {
            "model_ids": list(theta.model_ids),
            "theta": theta.theta.tolist(),
            "mean_skill": theta.theta.mean(axis=1).tolist(),
            "skill_std": var.tolist(),
            "projection_explained_ratio": None if proj is None else proj.explained_ratio.tolist(),
        },
    )
    width = max(len(m) for m in theta.model_ids)
    order = np.argsort(-theta.theta.mean(axis=1), kind="stable")
    lines = [f"{'model':<{width}}  " + " ".join(f"{'f' + str(c + 1):>7}" for c in range(theta.factor_count))]
    for i in order:
        lines.append(f"{theta.model_ids[i]:<{width}}  " + " ".join(f"{v:>+7.3f}" for v in theta.theta[i]))
    return "\n".join(lines)


def cmd_reliability(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    rel = diagnostics.reliability_report(s.fm, s.z, cfg.z_threshold, cfg.min_items)
    uniq = diagnostics.uniqueness_report(s.fm, cfg.uniqueness_threshold)
    outl = diagnostics.mahalanobis_outliers(
        s.z.z_scores, cfg.outlier_quantile, shrinkage=cfg.shrinkage_value(), ids=s.z.model_ids
    )
    _write_json(
        Path(cfg.out) / "reliability.json",
        "reliability",
        cfg,
        {"reliability": rel.to_dict(), "uniqueness": dataclasses.asdict(uniq), "outliers": outl.to_dict()},
    )
    t, u = uniq.max_task
    flagged = [m for m, f in zip(outl.ids, outl.flagged) if f]
    return "\n".join(
        [
            rel.table(),
            f"max uniqueness: {t} {u:.3f} ({sum(uniq.flagged)} task(s) above {uniq.threshold})",
            f"outliers at {cfg.outlier_quantile}: {', '.join(flagged) if flagged else 'none'}",
        ]
    )


def cmd_stability(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    c = s.n_factors if not cfg.model else s.fm.n_factors
    common = dict(gamma=cfg.gamma, tol=cfg.tol, max_iter=cfg.max_iter, jobs=cfg.jobs)
    if args.kind == "sweep":
        rep = stability.sweep_factor_count(s.z, c, cfg.ks(), **common)
    elif args.kind == "subsample":
        rep = stability.subsample_models(s.z, cfg.holdout_frac, cfg.runs, cfg.seed, c, **common)
    else:
        rep = stability.leave_one_task_out(s.z, c, **common)
    _write_json(Path(cfg.out) / f"stability-{args.kind}.json", "stability", cfg, rep.to_dict())
    return rep.table()


def _thresholds(cfg: RunConfig) -> novelty.NoveltyThresholds:
    names = {f.name for f in dataclasses.fields(novelty.NoveltyThresholds)}
    return novelty.NoveltyThresholds(**{n: getattr(cfg, n) for n in names})


def cmd_novelty(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    ids, vals = read_pairs(args.candidate, "model")
    m = s.z.n_models
    if len(ids) != m:
        raise ValidationError(f"{args.candidate}: candidate has {len(ids)} rows, expected {m} (one per model)")
    lookup = dict(zip(ids, vals))
    missing = [mid for mid in s.z.model_ids if mid not in lookup]
    if missing:
        raise AlignmentError(f"{args.candidate}: no score for model(s) {', '.join(missing[:5])}")
    phi = np.array([lookup[mid] for mid in s.z.model_ids])
    rep = novelty.assess_candidate(
        s.z, s.fm, s.theta, phi, gamma=cfg.gamma, tol=cfg.tol, max_iter=cfg.max_iter, thresholds=_thresholds(cfg)
    )
    _write_json(Path(cfg.out) / "novelty.json", "novelty", cfg, rep.to_dict())
    return rep.table()


def cmd_profile(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    tasks, vals = read_pairs(args.scores, "task")
    prof = applications.profile_new_model(
        s.fm, tasks, vals, s.z, model_id=args.model_id, quantile=cfg.outlier_quantile, shrinkage=cfg.shrinkage_value()
    )
    _write_json(Path(cfg.out) / "profile.json", "profile", cfg, prof.to_dict())
    return prof.table()


def cmd_select(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    theta = s.theta
    if args.scores is None:
        sampled = applications.maxmin_sample_models(theta, s.k())
        _write_json(Path(cfg.out) / "select-plan.json", "select", cfg, {"sampled_ids": sampled})
        return "evaluate the new task on these models:\n" + "\n".join(sampled)
    ids, vals = read_pairs(args.scores, "model")
    res = applications.predict_for_new_task(theta, ids, vals)
    _write_json(Path(cfg.out) / "select.json", "select", cfg, res.to_dict())
    return res.table()


def cmd_label(cfg: RunConfig, args) -> str:
    s = Session(cfg)
    desc = labeling.load_descriptions(args.descriptions)
    inputs = [labeling.diagnostic_tasks(s.fm, c, cfg.z_min) for c in range(s.fm.n_factors)]
    prompt = labeling.build_naming_prompt(inputs, desc)
    endpoint = labeling.EndpointConfig(
        url=cfg.endpoint_url or None, token_env=cfg.token_env or None, timeout=cfg.timeout, retries=cfg.retries
    )
    labels = labeling.name_factors(prompt, s.fm.n_factors, endpoint)
    out = Path(cfg.out)
    _write_json(
        out / "labels.json",
        "label",
        cfg,
        {
            "labels": labels,
            "status": "unreviewed",
            "source": "placeholder" if endpoint.offline else "endpoint",
            "factors": [dataclasses.asdict(i) for i in inputs],
            "prompt": prompt,
        },
    )
    return "\n".join(f"factor {c + 1}: {lab}" for c, lab in enumerate(labels))


# ---------------------------------------------------------------- parser


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [skillspace] section; flags override it")
    common.add_argument("--save-config", metavar="PATH", help="write the effective config and continue")
    common.add_argument("-v", "--verbose", action="store_true")
    for f in dataclasses.fields(RunConfig):
        kind = f.type if isinstance(f.type, str) else f.type.__name__
        if kind == "bool":
            common.add_argument(_flag(f.name), dest=f.name, default=None, action=argparse.BooleanOptionalAction)
        else:
            common.add_argument(_flag(f.name), dest=f.name, default=None, metavar=kind.upper())

    p = argparse.ArgumentParser(prog="skillspace", description="Latent skill analysis of benchmark leaderboards.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="fit and rotate the factor model")
    sub.add_parser("scores", parents=[common], help="skill scores for every model")
    sub.add_parser("reliability", parents=[common], help="alpha, omega, uniqueness and outliers")
    st = sub.add_parser("stability", parents=[common], help="perturbation stability harnesses")
    st.add_argument("--kind", choices=("sweep", "subsample", "loto"), default="sweep")
    nv = sub.add_parser("novelty", parents=[common], help="novelty score of a candidate task")
    nv.add_argument("--candidate", required=True, help="CSV of model_id,score for the candidate task")
    pr = sub.add_parser("profile", parents=[common], help="skill profile of a new model")
    pr.add_argument("--scores", required=True, help="CSV of task_id,score (0-10 scale)")
    pr.add_argument("--model-id", default="new-model")
    se = sub.add_parser("select", parents=[common], help="pick models to evaluate and rank the rest")
    se.add_argument("--scores", help="CSV of model_id,score on the new task; omit to get the sampling plan")
    lb = sub.add_parser("label", parents=[common], help="name the factors")
    lb.add_argument("--descriptions", required=True, help="CSV of task_id,description")
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig) if getattr(args, f.name) is not None
    }
    return RunConfig(**{**cfg.to_dict(), **overrides})


HANDLERS = {
    "fit": cmd_fit,
    "scores": cmd_scores,
    "reliability": cmd_reliability,
    "stability": cmd_stability,
    "novelty": cmd_novelty,
    "profile": cmd_profile,
    "select": cmd_select,
    "label": cmd_label,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.save_config:
            cfg.save(args.save_config)
        print(HANDLERS[args.command](cfg, args))
    except (InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SkillSpaceError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
