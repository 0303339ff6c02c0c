"""Command-line pipeline: simulate, train, sample, evaluate, qqdata.

Every command is a pure function of its input files, options, and seed,
so re-runs write byte-identical outputs. Options come from defaults,
then an optional key=value config file, then command-line flags, in
that order. Exit codes: 0 success, 2 bad arguments or configuration,
3 file problems, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from ._accel import HAS_NUMBA
from .aitchison import orthonormal_basis
from .angular import SUBSET_CAP, extreme_angles
from .datagen import LogisticConfig, sample_logistic
from .errors import (
    InputOutputError,
    NumericalError,
    ShapeError,
    ValidationError,
)
from .margins import fit_margins, gpd_quantile, pareto_standardize
from .metrics import coefficient_table, dependence_score, w2_distance
from .sampler import sample_angles, sample_tail
from .wgan import (
    AdamConfig,
    MlpSpec,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)

CONFIG_VERSION = "1"
SEARCH_ANGLE_COUNT = 4000

# hyperparameter search space: each candidate draws one value per row
GRID_BATCH_DIVISORS = (1, 2, 4, 8, 16)
GRID_LATENT_DIVISORS = (0.25, 0.5, 0.75, 1.0, 2.0)
GRID_HIDDEN_WIDTHS = (32, 64, 128, 256, 512)
GRID_HIDDEN_DEPTHS = (1, 2, 4, 8)
GRID_LEARNING_RATES = (0.01, 0.005, 0.001, 0.0005, 0.0001)
GRID_ADAM_BETAS = ((0.0, 0.9), (0.5, 0.9), (0.5, 0.99))
GRID_GRADIENT_PENALTIES = (0.1, 1.0, 3.0, 5.0, 7.0, 9.0)
GRID_MARGINAL_PENALTIES = (0.001, 0.01, 0.1, 1.0, 3.0)
GRID_CRITIC_STEPS = (1, 3, 5, 10)


# ---------------------------------------------------------------------------
# Option schema
# ---------------------------------------------------------------------------


def _parse_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"option '{key}': expected an integer, got {text!r}")


def _parse_float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"option '{key}': expected a number, got {text!r}")
    if not math.isfinite(value):
        raise ValidationError(f"option '{key}': value must be finite, got {text!r}")
    return value


def _parse_str(key, text):
    return text


def _parse_rounding(key, text):
    if text not in ("nearest", "floor", "ceil"):
        raise ValidationError(
            f"option '{key}': expected one of nearest/floor/ceil, got {text!r}"
        )
    return text


class _Field:
    def __init__(self, name, parse, default=None, required=False, help=""):
        self.name = name
        self.parse = parse
        self.default = default
        self.required = required
        self.help = help


_COMMON = [
    _Field("seed", _parse_int, default=0, help="master seed for the command"),
    _Field("threads", _parse_int, help="cap the compiled-kernel thread pool"),
]

_SCHEMAS = {
    "simulate": _COMMON
    + [
        _Field("out", _parse_str, required=True, help="output CSV path"),
        _Field("d", _parse_int, required=True, help="dimension"),
        _Field("theta", _parse_float, required=True, help="dependence parameter, >= 1"),
        _Field("alpha", _parse_float, default=1.0, help="marginal tail index, > 0"),
        _Field("n", _parse_int, required=True, help="number of rows"),
    ],
    "train": _COMMON
    + [
        _Field("data", _parse_str, required=True, help="training CSV path"),
        _Field("checkpoint", _parse_str, required=True, help="checkpoint output path"),
        _Field("log", _parse_str, help="loss-log CSV path (default: derived)"),
        _Field("k1", _parse_int, help="extreme-angle count (default: root rule)"),
        _Field("k_rounding", _parse_rounding, default="nearest",
               help="rounding rule for the default k = sqrt(n)"),
        _Field("lambda_gp", _parse_float, default=5.0, help="gradient penalty weight"),
        _Field("rho_marginal", _parse_float, default=1.0, help="marginal penalty weight"),
        _Field("n_d", _parse_int, default=5, help="critic steps per generator step"),
        _Field("batch_size", _parse_int, default=64, help="minibatch size"),
        _Field("latent_dim", _parse_int, default=16, help="latent dimension"),
        _Field("learning_rate", _parse_float, default=0.0005, help="Adam step size"),
        _Field("beta1", _parse_float, default=0.5, help="Adam first-moment decay"),
        _Field("beta2", _parse_float, default=0.9, help="Adam second-moment decay"),
        _Field("n_epochs", _parse_int, default=1000, help="training epochs"),
        _Field("hidden_width", _parse_int, default=128, help="neurons per hidden layer"),
        _Field("hidden_depth", _parse_int, default=2, help="hidden layers per network"),
        _Field("search", _parse_int, help="random-search budget (candidates)"),
        _Field("val", _parse_str, help="validation CSV for the random search"),
        _Field("search_table", _parse_str,
               help="per-candidate score CSV (default: derived)"),
    ],
    "sample": _COMMON
    + [
        _Field("checkpoint", _parse_str, required=True, help="trained checkpoint path"),
        _Field("data", _parse_str, required=True, help="original data CSV path"),
        _Field("out", _parse_str, required=True, help="output CSV path"),
        _Field("sidecar", _parse_str, help="per-margin fit CSV (default: derived)"),
        _Field("n_star", _parse_int, required=True, help="rows to generate"),
        _Field("k2", _parse_int, help="threshold exceedance count (default: root rule)"),
        _Field("k_rounding", _parse_rounding, default="nearest",
               help="rounding rule for the default k = sqrt(n)"),
    ],
    "evaluate": _COMMON
    + [
        _Field("generated", _parse_str, required=True, help="generated CSV path"),
        _Field("test", _parse_str, required=True, help="test CSV path"),
        _Field("report", _parse_str, required=True, help="metrics report CSV path"),
        _Field("scatter", _parse_str,
               help="per-subset coefficient CSV (default: derived)"),
        _Field("checkpoint", _parse_str,
               help="score angles drawn from this trained generator instead of "
                    "re-estimating them from the generated CSV"),
        _Field("n_angles", _parse_int, default=4000,
               help="generator angles to draw when a checkpoint is given"),
        _Field("k1", _parse_int,
               help="extreme-angle count for both files (default: root rule per file)"),
        _Field("k2", _parse_int,
               help="threshold exceedance count on the test file (default: root rule)"),
        _Field("k_rounding", _parse_rounding, default="nearest",
               help="rounding rule for the default k = sqrt(n)"),
        _Field("cap", _parse_int, default=SUBSET_CAP,
               help="maximum enumerated subsets per size"),
    ],
    "qqdata": _COMMON
    + [
        _Field("data", _parse_str, required=True, help="data CSV path"),
        _Field("out", _parse_str, required=True, help="output CSV path"),
        _Field("k2", _parse_int, help="threshold exceedance count (default: root rule)"),
        _Field("k_rounding", _parse_rounding, default="nearest",
               help="rounding rule for the default k = sqrt(n)"),
    ],
}


def _parse_config_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot read config file {path}: {exc}")
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(
                f"{path}, line {lineno}: expected 'key = value', got {line!r}"
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in values:
            raise ValidationError(f"{path}, line {lineno}: duplicate key '{key}'")
        values[key] = value
    if "version" not in values:
        raise ValidationError(f"{path}: missing required 'version' key")
    if values.pop("version") != CONFIG_VERSION:
        raise ValidationError(
            f"{path}: unsupported config version; this build reads version "
            f"{CONFIG_VERSION}"
        )
    return values


def resolve_options(command, config_path=None, flag_values=None):
    """Merge defaults, config-file values, and flag values for a command."""
    schema = {f.name: f for f in _SCHEMAS[command]}
    options = {f.name: f.default for f in schema.values()}
    if config_path is not None:
        for key, text in _parse_config_file(config_path).items():
            if key not in schema:
                raise ValidationError(
                    f"unknown config key '{key}' for command '{command}'"
                )
            options[key] = schema[key].parse(key, text)
    for key, text in (flag_values or {}).items():
        if text is None:
            continue
        options[key] = schema[key].parse(key, text)
    missing = [n for n, f in schema.items() if f.required and options[n] is None]
    if missing:
        raise ValidationError(
            f"command '{command}' is missing required option(s): "
            + ", ".join(sorted(missing))
        )
    if options.get("k1") is not None and options.get("k2") is not None:
        if options["k2"] > options["k1"]:
            raise ValidationError(
                f"k2={options['k2']} must not exceed k1={options['k1']}: tail "
                f"thresholds cannot sit below the level the generator was trained on"
            )
    return options


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------


def _float_repr(x):
    return repr(float(x))


def write_rows_csv(path, header, rows):
    """Write a CSV with LF newlines and shortest round-trip float text."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}")


def write_matrix_csv(path, X):
    X = np.asarray(X, dtype=np.float64)
    header = [f"col_{j + 1}" for j in range(X.shape[1])]
    write_rows_csv(path, header, ([_float_repr(v) for v in row] for row in X))


def read_matrix_csv(path):
    """Read a numeric CSV with a header row into an (n, d) float matrix."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}")
    if not rows:
        raise InputOutputError(f"{path}: empty file, expected a header row")
    header = rows[0]
    d = len(header)
    if d < 1:
        raise InputOutputError(f"{path}: header row has no columns")
    data = np.empty((len(rows) - 1, d))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != d:
            raise InputOutputError(
                f"{path}: row {i} has {len(row)} cells, expected {d}"
            )
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise InputOutputError(
                    f"{path}: row {i}, column {j + 1} ({header[j]}): cannot "
                    f"parse {cell!r} as a number"
                )
            if not math.isfinite(value):
                raise InputOutputError(
                    f"{path}: row {i}, column {j + 1} ({header[j]}): value "
                    f"{cell!r} is not finite"
                )
            data[i - 2, j] = value
    if data.shape[0] == 0:
        raise InputOutputError(f"{path}: no data rows after the header")
    return data


def _derived_path(base, suffix):
    return str(Path(base).with_suffix(suffix))


def resolve_k(explicit, n, rule, name):
    """Explicit count, or sqrt(n) under the configured rounding rule."""
    if explicit is not None:
        k = int(explicit)
    elif rule == "floor":
        k = int(math.floor(math.sqrt(n)))
    elif rule == "ceil":
        k = int(math.ceil(math.sqrt(n)))
    else:
        k = int(math.floor(math.sqrt(n) + 0.5))
    if not 1 <= k <= n - 1:
        raise ValidationError(
            f"{name}={k} must lie in [1, n-1] for n={n} rows"
        )
    return k


def _cap_threads(threads):
    if threads is None:
        return
    if threads < 1:
        raise ValidationError(f"threads must be positive, got {threads}")
    if HAS_NUMBA:
        import numba

        numba.set_num_threads(min(threads, numba.get_num_threads()))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(opts):
    cfg = LogisticConfig(
        d=opts["d"], theta=opts["theta"], alpha=opts["alpha"],
        n=opts["n"], seed=opts["seed"],
    )
    X = sample_logistic(cfg)
    write_matrix_csv(opts["out"], X)
    print(
        f"simulate: wrote n={cfg.n} rows, d={cfg.d}, theta={cfg.theta}, "
        f"alpha={cfg.alpha}, seed={cfg.seed} -> {opts['out']}"
    )


def _network_specs(d, latent_dim, width, depth):
    if width < 1 or depth < 1:
        raise ValidationError(
            f"hidden_width={width} and hidden_depth={depth} must be positive"
        )
    hidden = (width,) * depth
    spec_g = MlpSpec(input_dim=latent_dim, output_dim=d - 1, hidden_layers=hidden)
    spec_d = MlpSpec(input_dim=d - 1, output_dim=1, hidden_layers=hidden)
    return spec_g, spec_d


def _train_config(opts, k1):
    adam = AdamConfig(
        alpha=opts["learning_rate"], beta1=opts["beta1"], beta2=opts["beta2"]
    )
    return TrainConfig(
        k1=k1,
        lambda_gp=opts["lambda_gp"],
        rho_marginal=opts["rho_marginal"],
        n_D=opts["n_d"],
        batch_size=opts["batch_size"],
        adam=adam,
        latent_dim=opts["latent_dim"],
        n_epochs=opts["n_epochs"],
        seed=opts["seed"],
    )


def _write_loss_log(path, loss_log):
    write_rows_csv(
        path,
        ["epoch", "critic_loss", "generator_loss"],
        (
            [str(i + 1), _float_repr(row[0]), _float_repr(row[1])]
            for i, row in enumerate(loss_log)
        ),
    )


def _draw_candidate(rng, n_extremes, d):
    """One random hyperparameter draw; the batch grid divides the extreme count."""
    divisor = GRID_BATCH_DIVISORS[rng.integers(len(GRID_BATCH_DIVISORS))]
    latent_div = GRID_LATENT_DIVISORS[rng.integers(len(GRID_LATENT_DIVISORS))]
    beta1, beta2 = GRID_ADAM_BETAS[rng.integers(len(GRID_ADAM_BETAS))]
    return {
        "batch_size": max(1, n_extremes // divisor),
        "latent_dim": max(1, int((d - 1) / latent_div)),
        "hidden_width": GRID_HIDDEN_WIDTHS[rng.integers(len(GRID_HIDDEN_WIDTHS))],
        "hidden_depth": GRID_HIDDEN_DEPTHS[rng.integers(len(GRID_HIDDEN_DEPTHS))],
        "learning_rate": GRID_LEARNING_RATES[rng.integers(len(GRID_LEARNING_RATES))],
        "beta1": beta1,
        "beta2": beta2,
        "lambda_gp": GRID_GRADIENT_PENALTIES[
            rng.integers(len(GRID_GRADIENT_PENALTIES))
        ],
        "rho_marginal": GRID_MARGINAL_PENALTIES[
            rng.integers(len(GRID_MARGINAL_PENALTIES))
        ],
        "n_d": GRID_CRITIC_STEPS[rng.integers(len(GRID_CRITIC_STEPS))],
    }


_SEARCH_COLUMNS = (
    "batch_size", "latent_dim", "hidden_width", "hidden_depth", "learning_rate",
    "beta1", "beta2", "lambda_gp", "rho_marginal", "n_d",
)


def _run_search(X, opts, k1):
    if opts["val"] is None:
        raise ValidationError("search requires a validation CSV via 'val'")
    budget = opts["search"]
    if budget < 1:
        raise ValidationError(f"search budget must be positive, got {budget}")
    n, d = X.shape
    X_val = read_matrix_csv(opts["val"])
    if X_val.shape[1] != d:
        raise ShapeError(
            f"validation data has d={X_val.shape[1]}, training data has d={d}"
        )
    k_val = resolve_k(None, X_val.shape[0], opts["k_rounding"], "k1")
    phi_val, _ = extreme_angles(pareto_standardize(X_val), k_val)
    V = orthonormal_basis(d)

    # the extreme count sets the batch grid, so derive it before training
    _, n_extremes = extreme_angles(pareto_standardize(X), k1)
    draw_rng = np.random.default_rng(opts["seed"])
    children = np.random.SeedSequence(opts["seed"]).spawn(budget)

    rows = []
    best = None
    for i in range(budget):
        cand = _draw_candidate(draw_rng, n_extremes, d)
        cand_opts = dict(opts)
        cand_opts.update(cand)
        train_seed, angle_seed = (int(s) for s in children[i].generate_state(2))
        cand_opts["seed"] = train_seed
        spec_g, spec_d = _network_specs(
            d, cand["latent_dim"], cand["hidden_width"], cand["hidden_depth"]
        )
        result = train(X, _train_config(cand_opts, k1), spec_g, spec_d)
        angles = sample_angles(
            result.params.generator, V, SEARCH_ANGLE_COUNT, angle_seed
        )
        score = 0.5 * (
            dependence_score(angles, phi_val, d, 2, cap=opts["cap"], seed=0)
            + dependence_score(angles, phi_val, d, 3, cap=opts["cap"], seed=0)
        )
        rows.append(
            [str(i)]
            + [_float_repr(cand[c]) if isinstance(cand[c], float) else str(cand[c])
               for c in _SEARCH_COLUMNS]
            + [_float_repr(score)]
        )
        if best is None or score < best[0]:
            best = (score, i, result, _train_config(cand_opts, k1))

    table_path = opts["search_table"] or _derived_path(
        opts["checkpoint"], ".search.csv"
    )
    write_rows_csv(
        table_path, ["candidate", *_SEARCH_COLUMNS, "validation_score"], rows
    )
    score, index, result, best_cfg = best
    save_checkpoint(opts["checkpoint"], result.params, best_cfg, d)
    log_path = opts["log"] or _derived_path(opts["checkpoint"], ".losses.csv")
    _write_loss_log(log_path, result.loss_log)
    print(
        f"train: searched {budget} candidates; best candidate {index} has "
        f"validation score {score:.6f} -> {opts['checkpoint']}"
    )
    print(f"train: candidate table -> {table_path}")


def cmd_train(opts):
    X = read_matrix_csv(opts["data"])
    n, d = X.shape
    if d < 2:
        raise ValidationError(f"training data must have d >= 2 columns, got {d}")
    k1 = resolve_k(opts["k1"], n, opts["k_rounding"], "k1")
    if opts["search"] is not None:
        opts = dict(opts)
        opts.setdefault("cap", SUBSET_CAP)
        _run_search(X, opts, k1)
        return
    spec_g, spec_d = _network_specs(
        d, opts["latent_dim"], opts["hidden_width"], opts["hidden_depth"]
    )
    result = train(X, _train_config(opts, k1), spec_g, spec_d)
    save_checkpoint(opts["checkpoint"], result.params, _train_config(opts, k1), d)
    log_path = opts["log"] or _derived_path(opts["checkpoint"], ".losses.csv")
    _write_loss_log(log_path, result.loss_log)
    print(
        f"train: {opts['n_epochs']} epochs on {result.n_extremes} extreme angles "
        f"(d={d}, k1={k1}) -> {opts['checkpoint']}"
    )
    print(f"train: loss log -> {log_path}")


def cmd_sample(opts):
    params, header = load_checkpoint(opts["checkpoint"])
    X = read_matrix_csv(opts["data"])
    n, d = X.shape
    if d != header["d"]:
        raise ShapeError(
            f"checkpoint expects d={header['d']} columns but data has d={d}"
        )
    k2 = resolve_k(opts["k2"], n, opts["k_rounding"], "k2")
    fits = fit_margins(X, k2)
    result = sample_tail(
        params.generator,
        orthonormal_basis(d),
        fits,
        opts["n_star"],
        opts["seed"],
        header["k1"],
    )
    write_matrix_csv(opts["out"], result.rows)
    sidecar = opts["sidecar"] or _derived_path(opts["out"], ".margins.csv")
    write_rows_csv(
        sidecar,
        ["margin", "threshold", "scale", "shape"],
        (
            [
                str(j + 1),
                _float_repr(fits.thresholds[j]),
                _float_repr(fits.sigma[j]),
                _float_repr(fits.xi[j]),
            ]
            for j in range(d)
        ),
    )
    print(
        f"sample: accepted {result.rows.shape[0]} rows from {result.proposals} "
        f"proposals (k2={k2}, seed={opts['seed']}) -> {opts['out']}"
    )
    print(f"sample: margin fits -> {sidecar}")


def cmd_evaluate(opts):
    G = read_matrix_csv(opts["generated"])
    T = read_matrix_csv(opts["test"])
    if G.shape[1] != T.shape[1]:
        raise ShapeError(
            f"generated data has d={G.shape[1]} but test data has d={T.shape[1]}"
        )
    d = T.shape[1]
    if d < 2:
        raise ValidationError(f"evaluation needs d >= 2 columns, got {d}")
    seed = opts["seed"]
    k_t = resolve_k(opts["k1"], T.shape[0], opts["k_rounding"], "k1")
    phi_t, _ = extreme_angles(pareto_standardize(T), k_t)
    if opts["checkpoint"] is not None:
        params, header = load_checkpoint(opts["checkpoint"])
        if header["d"] != d:
            raise ShapeError(
                f"checkpoint expects d={header['d']} columns but the files "
                f"have d={d}"
            )
        if opts["n_angles"] < 1:
            raise ValidationError(
                f"n_angles must be positive, got {opts['n_angles']}"
            )
        phi_g = sample_angles(
            params.generator, orthonormal_basis(d), opts["n_angles"], seed
        )
        k_g = opts["n_angles"]
    else:
        k_g = resolve_k(opts["k1"], G.shape[0], opts["k_rounding"], "k1")
        phi_g, _ = extreme_angles(pareto_standardize(G), k_g)
    dep = {
        k: dependence_score(phi_g, phi_t, d, k, cap=opts["cap"], seed=seed)
        for k in (2, 3)
    }
    dep_avg = 0.5 * (dep[2] + dep[3])

    # both clouds are cut at the same test-estimated thresholds so that a
    # file evaluated against itself scores exactly zero
    k2 = resolve_k(opts["k2"], T.shape[0], opts["k_rounding"], "k2")
    thresholds = np.sort(T, axis=0)[T.shape[0] - k2 - 1, :]
    g_exceed = G[(G > thresholds[None, :]).any(axis=1)]
    t_exceed = T[(T > thresholds[None, :]).any(axis=1)]
    if g_exceed.shape[0] == 0:
        raise ValidationError(
            "no generated rows exceed the test-data thresholds; the generated "
            "file does not look like a tail sample at this k2"
        )
    w2 = w2_distance(g_exceed, t_exceed)

    report_rows = [
        ["dependence", "2", _float_repr(dep[2]), str(k_g), str(k_t), str(seed)],
        ["dependence", "3", _float_repr(dep[3]), str(k_g), str(k_t), str(seed)],
        ["dependence", "avg", _float_repr(dep_avg), str(k_g), str(k_t), str(seed)],
        ["w2_tail", "l2", _float_repr(w2), str(g_exceed.shape[0]),
         str(t_exceed.shape[0]), str(seed)],
    ]
    write_rows_csv(
        opts["report"], ["metric", "k", "value", "n_G", "n_T", "seed"], report_rows
    )

    scatter = opts["scatter"] or _derived_path(opts["report"], ".coefficients.csv")
    scatter_rows = []
    for k in (2, 3):
        subsets, theta_g, theta_t = coefficient_table(
            phi_g, phi_t, k, cap=opts["cap"], seed=seed
        )
        for row, tg, tt in zip(subsets, theta_g, theta_t):
            label = "+".join(str(int(j) + 1) for j in row)
            scatter_rows.append(
                [str(k), label, _float_repr(tg), _float_repr(tt)]
            )
    write_rows_csv(
        scatter,
        ["subset_size", "subset", "coefficient_generated", "coefficient_test"],
        scatter_rows,
    )
    print(
        f"evaluate: dependence k=2 {dep[2]:.6f}, k=3 {dep[3]:.6f}, "
        f"avg {dep_avg:.6f}; w2 tail {w2:.6f} -> {opts['report']}"
    )
    print(f"evaluate: coefficient scatter -> {scatter}")


def cmd_qqdata(opts):
    X = read_matrix_csv(opts["data"])
    n, d = X.shape
    k2 = resolve_k(opts["k2"], n, opts["k_rounding"], "k2")
    fits = fit_margins(X, k2)
    rows = []
    for j in range(d):
        excesses = fits.sorted_columns[n - k2 :, j] - fits.thresholds[j]
        for i in range(1, k2 + 1):
            p = (i - 0.5) / k2
            rows.append(
                [
                    str(j + 1),
                    _float_repr(p),
                    _float_repr(excesses[i - 1]),
                    _float_repr(gpd_quantile(p, fits.sigma[j], fits.xi[j])),
                ]
            )
    write_rows_csv(opts["out"], ["margin", "p", "empirical", "fitted"], rows)
    print(f"qqdata: {k2} rows per margin for d={d} margins -> {opts['out']}")


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "qqdata": cmd_qqdata,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tailgan",
        description=(
            "Generative modeling of multivariate tails: simulate benchmark "
            "data, train the angle generator, sample tail rows, and evaluate."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, fields in _SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument(
            "--config", default=None,
            help="key = value config file (requires a version key)",
        )
        for field in fields:
            p.add_argument(
                "--" + field.name.replace("_", "-"),
                dest=field.name,
                default=None,
                help=field.help + (" [required]" if field.required else ""),
            )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    flag_values = {
        f.name: getattr(args, f.name) for f in _SCHEMAS[args.command]
    }
    try:
        opts = resolve_options(args.command, args.config, flag_values)
        _cap_threads(opts.get("threads"))
        _COMMANDS[args.command](opts)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputOutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
