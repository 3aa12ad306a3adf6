"""
Command-line interface.

Subcommands write CSV files (header row, 17 significant digits) and a JSON
run manifest listing the parameters and every file written. ``replay``
re-runs a manifest. Exit codes: 0 success, 2 usage error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from hinfgp import __version__
from hinfgp.errors import HinfGPError, NumericalError
from hinfgp.excursion import ExcursionQuery, MultiplierGrid, excursion_bound, iqc_transform
from hinfgp.kernels import GeometricKernel, kernel_from_dict
from hinfgp.mcvalidate import gain_study
from hinfgp.regression import (
    Dataset,
    confidence_ellipsoid,
    fit_hyperparameters,
    geometric_family,
    predict_strict,
    predict_wide,
    resonance_family,
)
from hinfgp.sampling import FrequencyGrid, sample_kernel
from hinfgp.sysid import run_experiment

log = logging.getLogger("hinfgp")

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
FAMILIES = {"resonance": resonance_family, "geometric": geometric_family}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def parse_gamma_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop included) or a comma-separated list."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            grid = start + step * np.arange(count)
        else:
            grid = np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise UsageError(f"bad gamma grid {text!r}; use start:stop:step or a,b,c") from None
    if grid.size == 0 or np.any(grid <= 0):
        raise UsageError(f"gamma grid {text!r} must contain positive levels")
    return grid


def parse_range(text: str) -> tuple:
    def val(s):
        s = s.strip().lower()
        sign = -1.0 if s.startswith("-") else 1.0
        s = s.lstrip("+-")
        if s.endswith("pi"):
            coef = s[:-2].rstrip("*") or "1"
            return sign * float(coef) * math.pi
        return sign * float(s)

    try:
        lo, hi = (val(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"bad range {text!r}; use lo:hi, e.g. 0:pi") from None
    if not lo < hi:
        raise UsageError(f"empty range {text!r}")
    return lo, hi


def load_kernel_arg(path):
    if path is None:
        return GeometricKernel(0.5)
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"kernel file not found: {p}")
    try:
        return kernel_from_dict(json.loads(p.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot parse kernel file {p}: {exc}") from None


def load_multiplier(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"multiplier file not found: {p}")
    arr = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
    return MultiplierGrid(arr[:, 0], arr[:, 1], arr[:, 2] + 1j * arr[:, 3])


# --------------------------------------------------------------------------
# subcommands; each returns the list of files written


def cmd_sample(args):
    kern = load_kernel_arg(args.kernel)
    grid = FrequencyGrid.uniform(args.points, *parse_range(args.range))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r in sample_kernel(kern, grid, args.seed, args.count):
        path = out / f"realization_{r.index:04d}.csv"
        write_csv(
            path,
            ["omega", "re_f", "im_f", "abs_f"],
            zip(grid.omega, r.values.real, r.values.imag, np.abs(r.values)),
        )
        files.append(path)
    return files, out / "manifest.json"


def _posterior_rows(kern, data, omega, eta, estimator):
    z = np.exp(1j * omega)
    if len(data) == 0:
        preds = predict_strict(kern, data, z)
    elif estimator == "wide":
        preds = predict_wide(kern, data, z)
    else:
        preds = predict_strict(kern, data, z)
    rows = []
    for o, p in zip(omega, preds):
        e = confidence_ellipsoid(p, eta)
        ph = e.phase or (math.nan, math.nan)
        rows.append(
            (o, p.mean.real, p.mean.imag, math.sqrt(p.variance), *e.magnitude, *ph)
        )
    return rows


POSTERIOR_HEADER = [
    "omega", "re_mean", "im_mean", "sigma_p", "mag_lo", "mag_hi", "phase_lo", "phase_hi",
]


def _fit_and_predict(data, args, out):
    family = FAMILIES[args.family]()
    files = []
    if len(data) == 0:
        log.warning("empty dataset: writing prior curves")
        if args.family == "resonance":
            theta = [1.0, 0.5, 1.0, math.pi / 2, 0.9]
        else:
            theta = [1.0, 0.5]
        ll = math.nan
        trace = []
    else:
        fit = fit_hyperparameters(
            family, data, restarts=args.restarts, seed=args.seed, workers=args.threads
        )
        theta, ll, trace = fit.theta, fit.log_likelihood, fit.trace
    kern = family.build(theta)
    omega = np.linspace(0.0, math.pi, args.points)
    rows = _posterior_rows(kern, data, omega, args.eta, args.estimator)
    files.append(write_csv(out / "posterior.csv", POSTERIOR_HEADER, rows))
    fit_path = out / "fit.json"
    fit_path.write_text(
        json.dumps(
            {
                "family": args.family,
                "theta": dict(zip(family.names, theta)),
                "log_likelihood": ll,
                "noise": data.noise,
                "kernel": kern.to_dict(),
                "restarts": [
                    {"restart": e.get("restart"), "log_likelihood": e["log_likelihood"]}
                    for e in trace
                ],
            },
            indent=2,
        )
    )
    files.append(fit_path)
    return files


def cmd_regress(args):
    path = Path(args.data)
    if not path.is_file():
        raise UsageError(f"dataset file not found: {path}")
    data = Dataset.from_csv(path, args.noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return _fit_and_predict(data, args, out), out / "manifest.json"


def cmd_demo_resonance(args):
    ex = run_experiment(args.seed, noise=args.noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    etfe_path = out / "etfe.csv"
    ex.dataset.to_csv(etfe_path)
    files.append(etfe_path)
    files.append(
        write_csv(
            out / "truth.csv",
            ["omega", "re_g", "im_g"],
            zip(ex.truth_omega, ex.truth.real, ex.truth.imag),
        )
    )
    files += _fit_and_predict(ex.dataset, args, out)
    return files, out / "manifest.json"


def _report_rows(kern, gammas, args):
    rng = parse_range(args.range) if args.range else None
    rows = []
    for g in gammas:
        q = ExcursionQuery(kern, float(g), rng, args.n_omega, args.n_theta)
        r = excursion_bound(q)
        rows.append([g, r.expected_upcrossings, r.start_violation, r.bound])
    return rows


def cmd_excursion(args):
    kern = load_kernel_arg(args.kernel)
    if args.multiplier:
        kern = iqc_transform(kern, load_multiplier(args.multiplier))
    gammas = parse_gamma_grid(args.gamma_grid)
    rows = _report_rows(kern, gammas, args)
    header = ["gamma", "expected_upcrossings", "start_violation", "bound"]
    if args.validate:
        if args.multiplier:
            raise UsageError("--validate cannot be combined with --multiplier")
        study = gain_study(kern, gammas, args.validate, args.seed, workers=args.threads)
        header += ["mc_upcrossings", "mc_upcrossings_se", "mc_excursion", "mc_excursion_se"]
        for row, u, e in zip(rows, study.upcrossings, study.excursion):
            row += [u.estimate, u.standard_error, e.estimate, e.standard_error]
    out = write_csv(args.out, header, rows)
    return [out], out.with_suffix(".manifest.json")


def cmd_validate(args):
    kern = load_kernel_arg(args.kernel)
    gammas = parse_gamma_grid(args.gamma_grid)
    study = gain_study(kern, gammas, args.N, args.seed, workers=args.threads)
    rows = [
        [g, u.estimate, u.standard_error, e.estimate, e.standard_error, s.estimate, s.standard_error, args.N]
        for g, u, e, s in zip(gammas, study.upcrossings, study.excursion, study.start_violation)
    ]
    header = [
        "gamma", "upcrossings", "upcrossings_se", "excursion_probability",
        "excursion_se", "start_violation", "start_violation_se", "n",
    ]
    out = write_csv(args.out, header, rows)
    return [out], out.with_suffix(".manifest.json")


# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="hinfgp", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1, help="worker cap")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("sample", help="draw prior realizations")
    p.add_argument("--kernel", help="kernel JSON (default geometric alpha=0.5)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--points", type=int, default=513)
    p.add_argument("--range", default="-pi:pi")
    p.add_argument("--out", default="samples")
    common(p)
    p.set_defaults(func=cmd_sample)

    def fit_opts(p):
        p.add_argument("--family", choices=sorted(FAMILIES), default="resonance")
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--eta", type=float, default=3.0)
        p.add_argument("--points", type=int, default=200)
        p.add_argument("--estimator", choices=("strict", "wide"), default="strict")

    p = sub.add_parser("regress", help="fit and predict from an ETFE dataset")
    p.add_argument("--data", required=True, help="CSV with re_z, im_z, re_y, im_y")
    p.add_argument("--noise", type=float, default=0.0, help="noise variance")
    p.add_argument("--out", default="regress")
    fit_opts(p)
    common(p)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("demo-resonance", help="resonance identification experiment")
    p.add_argument("--noise", type=float, default=None, help="override the noise plug-in")
    p.add_argument("--out", default="demo")
    fit_opts(p)
    common(p)
    p.set_defaults(func=cmd_demo_resonance)

    p = sub.add_parser("excursion", help="upcrossing and excursion bounds")
    p.add_argument("--kernel")
    p.add_argument("--gamma-grid", default="1.0:4.0:0.25")
    p.add_argument("--range", help="frequency range lo:hi (default 0:pi)")
    p.add_argument("--n-omega", type=int, default=400)
    p.add_argument("--n-theta", type=int, default=256)
    p.add_argument("--multiplier", help="IQC multiplier CSV: omega, pi11, re_pi21, im_pi21")
    p.add_argument("--validate", type=int, default=0, metavar="N", help="append MC columns")
    p.add_argument("--out", default="report.csv")
    common(p)
    p.set_defaults(func=cmd_excursion)

    p = sub.add_parser("validate", help="Monte Carlo gain statistics")
    p.add_argument("--kernel")
    p.add_argument("--gamma-grid", default="1.0:4.0:0.5")
    p.add_argument("-N", type=int, default=100_000)
    p.add_argument("--out", default="mc.csv")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="override the output location")
    p.set_defaults(func=None)
    return parser


def _manifest(args, argv, files, elapsed):
    params = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "subcommand": args.command,
        "argv": list(argv),
        "parameters": params,
        "seed": params.get("seed"),
        "versions": {
            "hinfgp": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": elapsed,
        "outputs": [str(f) for f in files],
    }


def _replay_argv(args):
    path = Path(args.manifest)
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    argv = json.loads(path.read_text())["argv"]
    if args.out:
        argv = list(argv)
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return argv


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            argv = _replay_argv(args)
            args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s: %(message)s",
        )
        start = time.perf_counter()
        files, manifest_path = args.func(args)
        manifest = _manifest(args, argv, files + [manifest_path], time.perf_counter() - start)
        Path(manifest_path).write_text(json.dumps(manifest, indent=2))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if type(exc).__name__ == "SingularData":
            print("hint: pass a positive --noise or remove duplicated inputs", file=sys.stderr)
        return EXIT_NUMERICAL
    except HinfGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
