"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``predict``, ``eval``, ``sweep``,
``mean``, ``embed``, ``witness``. Every option can come from a
plain-text config file (``key = value`` lines, ``#`` comments) given
with ``--config``; command-line flags override config values. Unknown
config keys are rejected.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure. Standard output carries short summaries only; data goes to the
files named by ``--out`` and friends.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import filters, manifold, regress, simgen
from .bundle import FLOAT_FMT, read_covb, write_covb
from .errors import ConfigError, NumericalError
from .symmat import SymMat


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


# ---------------------------------------------------------------------------
# Option tables: one schema drives both config-file keys and CLI flags
# ---------------------------------------------------------------------------


def _parse_int(v: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"expected an integer, got {v!r}") from None


def _parse_float(v: str) -> float:
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"expected a number, got {v!r}") from None


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _parse_floats(v: str) -> list[float]:
    items = [s for s in v.split(",") if s.strip()]
    return [_parse_float(s) for s in items]


def _parse_str(v: str) -> str:
    return v.strip()


class Opt:
    def __init__(self, name, parse, default, help):
        self.name = name
        self.parse = parse
        self.default = default
        self.help = help


_GEN_OPTS = [
    Opt("p", _parse_int, 5, "number of sensors"),
    Opt("q", _parse_int, 2, "number of signal sources (q < p)"),
    Opt("n", _parse_int, 100, "number of subjects"),
    Opt("mu", _parse_float, 1.0, "distance of the mixing matrix from identity"),
    Opt("sigma", _parse_float, 0.0, "label noise standard deviation"),
    Opt("sigma_mix", _parse_float, 0.0, "per-subject mixing perturbation"),
    Opt("f", _parse_str, "log", "link function: identity, log, or sqrt"),
    Opt("orthogonal_a", _parse_bool, False, "replace the mixing by its orthogonal polar factor"),
    Opt("seed", _parse_int, 0, "random seed"),
]

_PIPE_OPTS = [
    Opt("filter", _parse_str, "identity", "spatial filter: identity, unsupervised, supervised, mne"),
    Opt("embedding", _parse_str, "geometric", "embedding: euclidean, geometric, wasserstein, logdiag"),
    Opt("rank", _parse_int, 0, "filter rank (0 means not set)"),
    Opt("leadfield", _parse_str, "", "leadfield file for the mne filter"),
    Opt("mne_lambda", _parse_float, 1.0, "Tikhonov regularization of the mne filter"),
    Opt("ridge_min", _parse_float, 1e-5, "smallest ridge grid value"),
    Opt("ridge_max", _parse_float, 1e3, "largest ridge grid value"),
    Opt("ridge_count", _parse_int, 100, "number of ridge grid values"),
]

OPTIONS = {
    "simulate": _GEN_OPTS + [Opt("out", _parse_str, "bundle.covb", "output bundle file")],
    "fit": _PIPE_OPTS
    + [
        Opt("bundle", _parse_str, "", "input bundle file"),
        Opt("out", _parse_str, "model.txt", "output model file"),
    ],
    "eval": _PIPE_OPTS
    + [
        Opt("bundle", _parse_str, "", "input bundle file"),
        Opt("folds", _parse_int, 10, "number of cross-validation folds"),
        Opt("seed", _parse_int, 0, "fold shuffling seed"),
        Opt("out", _parse_str, "results.csv", "output results file"),
    ],
    "predict": [
        Opt("model", _parse_str, "", "input model file"),
        Opt("bundle", _parse_str, "", "input bundle file"),
        Opt("out", _parse_str, "predictions.txt", "output predictions file"),
    ],
    "sweep": _GEN_OPTS
    + [
        Opt("preset", _parse_str, "", "named sweep: fig3-left, fig3-middle, fig3-right"),
        Opt("axis", _parse_str, "", "sweep axis: sigma, mu, or sigma_mix"),
        Opt("values", _parse_floats, None, "comma-separated axis values"),
        Opt("specs", _parse_str, "", "comma-separated pipelines, e.g. identity+geometric"),
        Opt("folds", _parse_int, 10, "number of cross-validation folds"),
        Opt("repeats", _parse_int, 3, "repeats per cell (seed offset)"),
        Opt("jobs", _parse_int, 0, "worker processes (0 means all cores)"),
        Opt("out", _parse_str, "sweep.csv", "output results file"),
    ],
    "mean": [
        Opt("bundle", _parse_str, "", "input bundle file"),
        Opt("metric", _parse_str, "geometric", "mean metric: euclidean, geometric, wasserstein"),
        Opt("rank", _parse_int, 0, "rank for the wasserstein mean (0: bundle rank)"),
        Opt("out", _parse_str, "mean.txt", "output matrix file"),
    ],
    "embed": [
        Opt("bundle", _parse_str, "", "input bundle file"),
        Opt("embedding", _parse_str, "geometric", "embedding kind"),
        Opt("rank", _parse_int, 0, "rank for the wasserstein embedding (0: bundle rank)"),
        Opt("out", _parse_str, "features.txt", "output feature file"),
    ],
    "witness": [
        Opt("out", _parse_str, "", "also write the table to this file"),
    ],
}


def parse_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    table = OPTIONS[command]
    by_name = {o.name: o for o in table}
    values = {o.name: o.default for o in table}
    if args.config:
        for key, raw in parse_config_file(args.config).items():
            if key not in by_name:
                raise ConfigError(f"unknown config key {key!r} for command {command!r}")
            values[key] = by_name[key].parse(raw)
    for opt in table:
        flag_val = getattr(args, opt.name, None)
        if flag_val is not None:
            values[opt.name] = flag_val
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdreg",
        description="Regression on covariance matrices via tangent-space embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in OPTIONS.items():
        cp = sub.add_parser(command)
        cp.add_argument("--config", default=None, help="plain-text config file")
        for opt in table:
            flag = "--" + opt.name.replace("_", "-")
            cp.add_argument(flag, type=opt.parse, default=None, help=opt.help)
    return parser


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _require_file(opts, key) -> str:
    if not opts[key]:
        raise ConfigError(f"missing required option {key!r}")
    if not Path(opts[key]).exists():
        raise ConfigError(f"{key} file not found: {opts[key]}")
    return opts[key]


def _generative_config(opts) -> simgen.GenerativeConfig:
    return simgen.GenerativeConfig(
        p=opts["p"],
        q=opts["q"],
        n=opts["n"],
        mu=opts["mu"],
        sigma=opts["sigma"],
        sigma_mix=opts["sigma_mix"],
        f_kind=opts["f"],
        orthogonal_a=opts["orthogonal_a"],
        seed=opts["seed"],
    )


def _ridge_grid(opts) -> np.ndarray:
    lo, hi, count = opts["ridge_min"], opts["ridge_max"], opts["ridge_count"]
    if lo <= 0 or hi <= lo or count < 1:
        raise ConfigError("ridge grid needs 0 < ridge_min < ridge_max and ridge_count >= 1")
    if count == 1:
        return np.array([lo])
    return np.logspace(np.log10(lo), np.log10(hi), count)


def _pipeline_spec(opts) -> regress.PipelineSpec:
    lead = None
    if opts["filter"] == "mne":
        lead = filters.read_leadfield(_require_file(opts, "leadfield"))
    rank = opts["rank"] if opts["rank"] > 0 else None
    return regress.PipelineSpec(
        filter_kind=opts["filter"],
        filter_rank=rank,
        embedding_kind=opts["embedding"],
        ridge_grid=_ridge_grid(opts),
        leadfield=lead,
        mne_lambda=opts["mne_lambda"],
    )


def _effective_rank(spec: regress.PipelineSpec, bund) -> int:
    if spec.filter_kind == "identity":
        return bund.dim
    if spec.filter_kind == "mne":
        return spec.leadfield.g.shape[1]
    return spec.filter_rank


def _write_matrix_file(path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(" ".join(_fmt(x) for x in np.atleast_1d(row)))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Model file: MODEL v1
# ---------------------------------------------------------------------------


def write_model(path, state: regress.FoldState) -> None:
    filt, emb, model = state.filt, state.embedding, state.model
    p, r = filt.w.shape
    lines = ["MODEL v1"]
    lines.append(f"embedding {emb.kind} {emb.rank if emb.rank is not None else 0}")
    lines.append(f"filter {filt.kind} {p} {r}")
    for row in filt.w:
        lines.append(" ".join(_fmt(x) for x in row))
    lines.append(("filter_eigs " + " ".join(_fmt(x) for x in filt.eigenvalues)).rstrip())
    if emb.reference is None:
        lines.append("reference none")
    else:
        lines.append(f"reference {emb.reference.dim}")
        for row in emb.reference.data:
            lines.append(" ".join(_fmt(x) for x in row))
    lines.append(
        f"ridge {model.beta.size} {_fmt(model.lambda_star)} {_fmt(model.intercept)}"
    )
    lines.append("mean " + " ".join(_fmt(x) for x in model.feature_mean))
    lines.append("scale " + " ".join(_fmt(x) for x in model.feature_scale))
    lines.append("beta " + " ".join(_fmt(x) for x in model.beta))
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> regress.FoldState:
    path = Path(path)
    lines = path.read_text().splitlines()
    try:
        if lines[0].strip() != "MODEL v1":
            raise ConfigError(f"{path}: expected 'MODEL v1' header, got {lines[0]!r}")
        _, emb_kind, emb_rank = lines[1].split()
        _, filt_kind, p, r = lines[2].split()
        p, r, emb_rank = int(p), int(r), int(emb_rank)
        pos = 3
        w = np.array([[float(x) for x in lines[pos + i].split()] for i in range(p)])
        pos += p
        eig_tokens = lines[pos].split()
        if eig_tokens[0] != "filter_eigs":
            raise ConfigError(f"{path}: expected 'filter_eigs' at line {pos + 1}")
        eigs = np.array([float(x) for x in eig_tokens[1:]])
        pos += 1
        ref_tokens = lines[pos].split()
        if ref_tokens[0] != "reference":
            raise ConfigError(f"{path}: expected 'reference' at line {pos + 1}")
        pos += 1
        reference = None
        if ref_tokens[1] != "none":
            rp = int(ref_tokens[1])
            reference = SymMat(
                [[float(x) for x in lines[pos + i].split()] for i in range(rp)]
            )
            pos += rp
        ridge_tokens = lines[pos].split()
        if ridge_tokens[0] != "ridge":
            raise ConfigError(f"{path}: expected 'ridge' at line {pos + 1}")
        k = int(ridge_tokens[1])
        lam, intercept = float(ridge_tokens[2]), float(ridge_tokens[3])
        pos += 1
        vectors = {}
        for name in ("mean", "scale", "beta"):
            tokens = lines[pos].split()
            if tokens[0] != name or len(tokens) != k + 1:
                raise ConfigError(f"{path}: expected '{name}' with {k} values at line {pos + 1}")
            vectors[name] = np.array([float(x) for x in tokens[1:]])
            pos += 1
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed model file: {exc}") from exc
    filt = filters.SpatialFilter(w=w, kind=filt_kind, rank_out=r, eigenvalues=eigs)
    emb = manifold.Embedding(
        kind=emb_kind,
        reference=reference,
        rank=emb_rank if emb_rank > 0 else None,
    )
    model = regress.RidgeModel(
        beta=vectors["beta"],
        intercept=intercept,
        lambda_star=lam,
        feature_mean=vectors["mean"],
        feature_scale=vectors["scale"],
        grid=np.array([lam]),
        gcv_path=np.empty(0),
    )
    return regress.FoldState(filt=filt, embedding=emb, model=model)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(opts) -> int:
    cfg = _generative_config(opts)
    bund, _ = simgen.sample_bundle(cfg)
    write_covb(opts["out"], bund)
    labels = bund.labels
    print(
        f"simulated n={bund.n} p={bund.dim} rank={bund.nominal_rank} seed={cfg.seed} "
        f"labels mean={labels.mean():.6g} std={labels.std():.6g} -> {opts['out']}"
    )
    return 0


def cmd_fit(opts) -> int:
    bund = read_covb(_require_file(opts, "bundle"))
    spec = _pipeline_spec(opts)
    state = regress.fit_fold(bund, spec)
    write_model(opts["out"], state)
    train_mae = float(np.mean(np.abs(bund.labels - regress.predict_fold(state, bund))))
    print(
        f"fitted {spec.label} on n={bund.n} "
        f"lambda={state.model.lambda_star:.6g} train_mae={train_mae:.6g} -> {opts['out']}"
    )
    return 0


def cmd_eval(opts) -> int:
    bund = read_covb(_require_file(opts, "bundle"))
    folds = opts["folds"]
    if folds < 2 or folds > bund.n:
        raise ConfigError(f"folds must be in [2, {bund.n}], got {folds}")
    spec = _pipeline_spec(opts)
    report = regress.run_pipeline_cv(bund, spec, folds, seed=opts["seed"])
    rows = regress.results_rows(spec, report, rank=_effective_rank(spec, bund))
    regress.write_results_csv(opts["out"], rows)
    print(
        f"evaluated {spec.label} folds={folds} seed={opts['seed']} "
        f"mean_mae={report.mean_mae:.6g} -> {opts['out']}"
    )
    return 0


def cmd_predict(opts) -> int:
    state = read_model(_require_file(opts, "model"))
    bund = read_covb(_require_file(opts, "bundle"))
    yhat = regress.predict_fold(state, bund)
    _write_matrix_file(opts["out"], f"PRED v1 {len(yhat)}", yhat)
    mae = float(np.mean(np.abs(bund.labels - yhat)))
    print(f"predicted n={len(yhat)} mae={mae:.6g} -> {opts['out']}")
    return 0


def _sweep_specs(opts, q: int) -> list[regress.PipelineSpec]:
    tokens = [t for t in opts["specs"].split(",") if t.strip()]
    if not tokens:
        return [
            regress.PipelineSpec(
                filter_kind="identity", embedding_kind="geometric", name="geometric"
            ),
            regress.PipelineSpec(
                filter_kind="identity", embedding_kind="wasserstein", name="wasserstein"
            ),
            regress.PipelineSpec(
                filter_kind="identity", embedding_kind="logdiag", name="logdiag"
            ),
            regress.PipelineSpec(
                filter_kind="supervised",
                filter_rank=q,
                embedding_kind="logdiag",
                name="supervised+logdiag",
            ),
        ]
    specs = []
    for token in tokens:
        token = token.strip()
        rank = None
        if ":" in token:
            token, rank_str = token.rsplit(":", 1)
            rank = _parse_int(rank_str)
        if "+" not in token:
            raise ConfigError(f"bad pipeline spec {token!r}; expected filter+embedding")
        fkind, ekind = token.split("+", 1)
        if fkind in ("unsupervised", "supervised") and rank is None:
            rank = q
        try:
            specs.append(
                regress.PipelineSpec(
                    filter_kind=fkind, filter_rank=rank, embedding_kind=ekind
                )
            )
        except ValueError as exc:
            raise ConfigError(f"bad pipeline spec {token!r}: {exc}") from exc
    return specs


SWEEP_PRESETS = {
    "fig3-left": {"axis": "sigma", "values": [0.0, 0.05, 0.1, 0.2, 0.4]},
    "fig3-middle": {"axis": "mu", "values": [0.0, 0.25, 0.5, 0.75, 1.0], "sigma": 0.0},
    "fig3-right": {"axis": "sigma_mix", "values": [0.0, 0.0025, 0.005, 0.01, 0.02]},
}


def cmd_sweep(opts) -> int:
    preset = opts["preset"]
    if preset:
        if preset not in SWEEP_PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; expected one of {sorted(SWEEP_PRESETS)}"
            )
        chosen = SWEEP_PRESETS[preset]
        opts = dict(opts)
        opts["axis"] = chosen["axis"]
        opts["values"] = chosen["values"]
        if "sigma" in chosen:
            opts["sigma"] = chosen["sigma"]
    if opts["axis"] not in simgen.SWEEP_AXES:
        raise ConfigError(
            f"sweep axis must be one of {simgen.SWEEP_AXES}, got {opts['axis']!r}"
        )
    if not opts["values"]:
        raise ConfigError("sweep needs a nonempty list of axis values")
    if opts["repeats"] < 1:
        raise ConfigError("repeats must be at least 1")
    cfg = _generative_config(opts)
    specs = _sweep_specs(opts, cfg.q)
    jobs = opts["jobs"] if opts["jobs"] > 0 else (os.cpu_count() or 1)
    rows = simgen.sweep(
        cfg,
        opts["axis"],
        opts["values"],
        specs,
        folds=opts["folds"],
        repeats=opts["repeats"],
        jobs=jobs,
    )
    simgen.write_sweep_csv(opts["out"], rows)
    errors = sum(1 for r in rows if r["error"])
    print(
        f"swept {opts['axis']} over {len(opts['values'])} values x {len(specs)} pipelines "
        f"x {opts['repeats']} repeats ({len(rows)} rows, {errors} errors) -> {opts['out']}"
    )
    return 0


def cmd_mean(opts) -> int:
    bund = read_covb(_require_file(opts, "bundle"))
    metric = opts["metric"]
    if metric == "euclidean":
        m = manifold.mean_euclidean(bund.matrices)
    elif metric == "geometric":
        m = manifold.mean_geometric(bund.matrices)
    elif metric == "wasserstein":
        rank = opts["rank"] if opts["rank"] > 0 else bund.nominal_rank
        m = manifold.mean_wasserstein(bund.matrices, rank)
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    _write_matrix_file(opts["out"], f"SYMMAT v1 {m.dim}", m.data)
    print(f"{metric} mean of n={bund.n} p={m.dim} trace={np.trace(m.data):.6g} -> {opts['out']}")
    return 0


def cmd_embed(opts) -> int:
    bund = read_covb(_require_file(opts, "bundle"))
    kind = opts["embedding"]
    if kind not in manifold.EMBEDDING_KINDS:
        raise ConfigError(
            f"unknown embedding {kind!r}; expected one of {manifold.EMBEDDING_KINDS}"
        )
    rank = opts["rank"] if opts["rank"] > 0 else bund.nominal_rank
    if kind == "wasserstein":
        embedding = manifold.fit_embedding(bund.matrices, kind, rank=rank)
    else:
        embedding = manifold.fit_embedding(bund.matrices, kind)
    feats = manifold.embed(embedding, bund.matrices)
    _write_matrix_file(opts["out"], f"FEAT v1 {feats.n} {feats.k}", feats.rows)
    print(f"embedded n={feats.n} k={feats.k} kind={kind} -> {opts['out']}")
    return 0


def cmd_witness(opts) -> int:
    a, b, dists = manifold.no_affine_invariance_witness()
    lines = ["rank-deficient pair: congruence by diag(1, eps) shrinks the distance"]
    lines.append("wasserstein distance d(a, b) = " + _fmt(manifold.dist_wasserstein(a, b)))
    lines.append("eps distance")
    for eps, d in zip(manifold.WITNESS_EPSILONS, dists):
        lines.append(f"{_fmt(eps)} {_fmt(d)}")
    decreasing = all(d1 > d2 for d1, d2 in zip(dists, dists[1:]))
    lines.append(f"strictly decreasing: {'yes' if decreasing else 'no'}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if opts["out"]:
        Path(opts["out"]).write_text(text)
    return 0


DISPATCH = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
    "mean": cmd_mean,
    "embed": cmd_embed,
    "witness": cmd_witness,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        opts = resolve_options(args.command, args)
        return DISPATCH[args.command](opts)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
