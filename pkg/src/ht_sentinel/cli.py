"""``ht-sentinel`` command line.

stdout carries one JSON document per command (``"schema": "ht-sentinel/v1"``);
human-readable summaries go to stderr. Exit codes: 0 success, 1 usage or
configuration error, 2 bad input data, 3 numeric failure.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import calibration, criterion, ingest, report, synth, theory
from .errors import HTSentinelError, InvalidConfigError, InvalidInputError
from .powerlaw import (
    DEFAULT_MIN_TAIL,
    bootstrap_pvalue,
    fit_exponential,
    fit_lognormal,
    loglik_ratio,
)
from .spectra import esd

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
SYNTH_KINDS = ("power_law", "exponential", "log_normal", "gaussian_matrix", "heavytail_matrix", "trajectory")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(doc):
    doc = {"schema": calibration.SCHEMA, **doc}
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _say(text):
    print(text, file=sys.stderr)


def _float_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise InvalidConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise InvalidConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _load_any(path):
    with open(path, "rb") as fh:
        head = fh.read(len(ingest.NPY_MAGIC))
    if head == ingest.NPY_MAGIC:
        return esd(ingest.read_matrix(path))
    return ingest.read_eigenvalues(path)


def cmd_esd(args):
    spectrum = esd(ingest.read_matrix(args.matrix_path))
    ingest.write_eigenvalues(args.out_path, spectrum)
    top = [float(v) for v in spectrum.eigenvalues[::-1][:5]]
    _emit({"command": "esd", "count": len(spectrum), "top5": top, "out": str(args.out_path)})
    _say(f"{len(spectrum)} eigenvalues; top 5: " + ", ".join(f"{v:.6g}" for v in top))
    return EXIT_OK


def cmd_fit(args):
    if args.bootstrap is not None and args.bootstrap < 100:
        raise InvalidConfigError(f"--bootstrap needs at least 100 replicates, got {args.bootstrap}")
    spectrum = _load_any(args.input_path)
    fit = criterion.fit_spectrum(spectrum, args.min_tail, args.min_tail_fraction)
    d_star = calibration.threshold_d_star(args.c, fit.n_tail)
    vs_exp = loglik_ratio(fit.tail, fit, fit_exponential(fit.tail))
    doc = {
        "command": "fit",
        "alpha": fit.alpha,
        "x_min": fit.x_min,
        "n_tail": fit.n_tail,
        "d_tilde": fit.ks_d,
        "d_star": d_star,
        "indicator": d_star - fit.ks_d,
        "heavy_tailed": bool(fit.ks_d <= d_star),
        "vs_exponential": {"r": vs_exp.r, "p_value": vs_exp.p_value, "winner": vs_exp.winner.value},
    }
    try:
        vs_ln = loglik_ratio(fit.tail, fit, fit_lognormal(fit.tail))
        doc["vs_lognormal"] = {"r": vs_ln.r, "p_value": vs_ln.p_value, "winner": vs_ln.winner.value}
    except InvalidInputError:
        doc["vs_lognormal"] = None
    if args.bootstrap is not None:
        gof = bootstrap_pvalue(spectrum, fit, args.bootstrap, seed=args.seed, min_tail=args.min_tail)
        doc["bootstrap"] = {"n": gof.n_bootstrap, "seed": args.seed, "p_value": gof.p_value}
    _emit(doc)
    _say(
        f"alpha={fit.alpha:.4f} x_min={fit.x_min:.6g} n_tail={fit.n_tail} d={fit.ks_d:.4f} "
        f"d*={d_star:.4f} heavy_tailed={fit.ks_d <= d_star}"
    )
    return EXIT_OK


def cmd_calibrate(args):
    config = calibration.CalibrationConfig(
        alphas=_float_list(args.alphas),
        n_tails=_int_list(args.ntails),
        runs=args.runs,
        seed=args.seed,
    )
    result = calibration.run_calibration(config)
    files = {}
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(result.to_json(), encoding="utf-8")
        hist = out.with_name(out.stem + "_histogram.csv")
        with open(hist, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.histogram_csv(per_cell=True))
        svg = out.with_name(out.stem + "_histogram.svg")
        report.render_plot(
            {"pooled S": result.pooled}, "histogram", svg, title="Normalized KS statistic", xlabel="S", ylabel="count"
        )
        files = {"json": str(out), "histogram_csv": str(hist), "histogram_svg": str(svg)}
    _emit({"command": "calibrate", **result.to_dict(), "files": files})
    _say(f"pooled q99.9 = {result.pooled_quantiles['q99.9']:.4f}, max = {result.pooled_quantiles['max']:.4f}")
    _say(f"C = {result.recommended_c}")
    return EXIT_OK


def _analyze_plots(prefix, trajectory, segmentation, decision, spectra, fit_args):
    epochs = trajectory.epochs
    markers = []
    if segmentation is not None:
        markers = [("phase I end", segmentation.phase1_end), ("phase II end", segmentation.phase2_end)]
    if decision.triggered:
        markers.append(("stop", decision.stop_epoch))
    plots = {
        "indicator": (
            {
                "d_tilde": (epochs, trajectory.column("d_tilde")),
                "d_star": (epochs, trajectory.column("d_star")),
                "indicator": (epochs, trajectory.column("indicator")),
            },
            "KS distance and threshold",
        ),
        "alpha": ({"alpha": (epochs, trajectory.column("alpha"))}, "Power-law exponent"),
        "x_min": ({"x_min": (epochs, trajectory.column("x_min"))}, "Tail cutoff"),
    }
    paths = {}
    for name, (series, title) in plots.items():
        path = prefix.with_name(f"{prefix.name}_{name}.svg")
        report.render_plot(series, "trajectory", path, title=title, xlabel="epoch", ylabel=name, markers=markers)
        paths[name] = str(path)
    if decision.stop_epoch in spectra:
        spectrum = spectra[decision.stop_epoch]
        fit = criterion.fit_spectrum(spectrum, *fit_args)
        path = prefix.with_name(f"{prefix.name}_esd.svg")
        report.render_plot(
            {f"epoch {decision.stop_epoch}": spectrum.eigenvalues}, "esd_loglog", path, title="ESD tail", fit=fit
        )
        paths["esd"] = str(path)
    return paths


def cmd_analyze(args):
    manifest = ingest.load_manifest(args.manifest_path)
    prefix = Path(args.out_prefix) if args.out_prefix else Path(args.manifest_path).parent / "analysis"
    prefix.parent.mkdir(parents=True, exist_ok=True)
    records, failures, spectra = [], [], {}
    for entry in manifest.entries:
        try:
            spectrum = ingest.load_spectrum(entry)
            rec = criterion.evaluate_epoch(
                spectrum,
                c=manifest.c_constant,
                min_tail=manifest.min_tail,
                epoch=entry.epoch,
                min_tail_fraction=manifest.min_tail_fraction,
            )
        except (HTSentinelError, OSError) as exc:
            failures.append({"epoch": entry.epoch, "path": str(entry.path), "error": str(exc)})
            _say(f"epoch {entry.epoch}: {exc}")
            continue
        records.append(rec)
        spectra[entry.epoch] = spectrum
    if not records:
        _emit({"command": "analyze", "stop_epoch": None, "failures": failures, "files": {}})
        _say("no readable entries")
        return EXIT_INPUT

    trajectory = criterion.Trajectory(tuple(records), manifest.model_label)
    rules = criterion.PhaseRules()
    segmentation = None
    if len(trajectory) >= 2 * rules.window:
        segmentation = criterion.classify_phases(trajectory, rules)
    decision = criterion.stop_epoch(trajectory, args.mode, args.patience)
    csv_path, json_path = report.write_trajectory(trajectory, segmentation, decision, prefix, failures)
    files = {"csv": str(csv_path), "json": str(json_path)}
    fit_args = (manifest.min_tail, manifest.min_tail_fraction)
    files.update(_analyze_plots(prefix, trajectory, segmentation, decision, spectra, fit_args))

    stop = decision.stop_epoch if decision.triggered else None
    doc = {
        "command": "analyze",
        "model_label": manifest.model_label,
        "matrix_id": manifest.matrix_id,
        "mode": decision.mode.value,
        "stop_epoch": stop,
        "peak_indicator": decision.peak_indicator,
        "n_records": len(trajectory),
        "failures": failures,
        "files": files,
    }
    if segmentation is not None:
        doc["segmentation"] = {"phase1_end": segmentation.phase1_end, "phase2_end": segmentation.phase2_end}
    _emit(doc)
    _say(f"stop epoch: {stop if stop is not None else 'none (indicator never positive)'}")
    return EXIT_INPUT if failures else EXIT_OK


def _parse_params(tokens):
    params = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise InvalidConfigError(f"parameters must look like key=value, got {token!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def _trajectory_spec(params, seed):
    fields = {f.name for f in dataclasses.fields(synth.TrajectorySpec)}
    kwargs = {"seed": seed}
    base = synth.TrajectorySpec()
    b1, b2 = params.pop("b1", base.phase_boundaries[0]), params.pop("b2", base.phase_boundaries[1])
    n, m = params.pop("n", base.matrix_dims[0]), params.pop("m", base.matrix_dims[1])
    kwargs.update(phase_boundaries=(int(b1), int(b2)), matrix_dims=(int(n), int(m)))
    for key, value in params.items():
        if key not in fields:
            raise InvalidConfigError(f"unknown trajectory parameter {key!r}")
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    return synth.TrajectorySpec(**kwargs)


def cmd_synth(args):
    if args.kind not in SYNTH_KINDS:
        raise InvalidConfigError(f"unknown kind {args.kind!r}; expected one of {', '.join(SYNTH_KINDS)}")
    params = _parse_params(args.params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.kind == "trajectory":
            spec = _trajectory_spec(params, args.seed)
            target = out_dir / "trajectory"
            manifest = synth.gen_trajectory(spec, target)
            doc = {"manifest": str(target / "manifest.json"), "files": len(manifest.entries)}
        elif args.kind.endswith("_matrix"):
            n, m = int(params.pop("n", 400)), int(params.pop("m", 400))
            if args.kind == "gaussian_matrix":
                w = synth.gen_gaussian_matrix(n, m, float(params.pop("sigma", 1.0)), args.seed)
            else:
                w = synth.gen_heavytail_matrix(n, m, float(params.pop("tail_alpha", 2.5)), args.seed)
            if params:
                raise InvalidConfigError(f"unknown parameters {sorted(params)}")
            path = out_dir / f"{args.kind}.npy"
            ingest.write_matrix(path, w)
            doc = {"path": str(path), "shape": [n, m]}
        else:
            n = int(params.pop("n", 1000))
            values = synth.gen_distribution(args.kind, params, n, seed=args.seed)
            path = out_dir / f"{args.kind}.txt"
            ingest.write_eigenvalues(path, np.sort(values))
            doc = {"path": str(path), "n": n}
    except (TypeError, ValueError) as exc:
        if isinstance(exc, HTSentinelError):
            raise
        raise InvalidConfigError(f"bad parameters for {args.kind}: {exc}") from None
    _emit({"command": "synth", "kind": args.kind, "seed": args.seed, **doc})
    _say(f"wrote {args.kind} to {out_dir}")
    return EXIT_OK


def cmd_theory(args):
    rep = theory.theory_report()
    if args.out:
        theory.write_theory_report(args.out, rep)
    _emit({"command": "theory", **{k: v for k, v in rep.items() if k != "schema"}})
    for c in rep["claims"]:
        tag = "PASS" if c["passed"] else ("REPORTED" if not c["asserted"] else "FAIL")
        _say(f"{tag:8s} {c['claim']}: observed {c['observed']:.6g} vs bound {c['bound']:g}")
    return EXIT_OK if rep["ok"] else EXIT_NUMERIC


def build_parser():
    parser = _Parser(prog="ht-sentinel", description="Heavy-tail spectral diagnostics for weight matrices.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("esd", help="eigenvalues of W^T W for an NPY matrix")
    p.add_argument("matrix_path")
    p.add_argument("out_path")
    p.set_defaults(func=cmd_esd)

    p = sub.add_parser("fit", help="power-law fit of a matrix ESD or an eigenvalue file")
    p.add_argument("input_path")
    p.add_argument("--min-tail", type=int, default=DEFAULT_MIN_TAIL)
    p.add_argument("--min-tail-fraction", type=float, default=criterion.DEFAULT_MIN_TAIL_FRACTION)
    p.add_argument("--c", type=float, default=criterion.DEFAULT_C)
    p.add_argument("--bootstrap", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    defaults = calibration.CalibrationConfig()
    p = sub.add_parser("calibrate", help="Monte Carlo calibration of the threshold constant")
    p.add_argument("--alphas", default=",".join(f"{a:g}" for a in defaults.alphas))
    p.add_argument("--ntails", default=",".join(str(n) for n in defaults.n_tails))
    p.add_argument("--runs", type=int, default=defaults.runs)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("analyze", help="indicator trajectory, phases and stop epoch for a run manifest")
    p.add_argument("manifest_path")
    p.add_argument("--mode", choices=[m.value for m in criterion.StopMode], default="offline")
    p.add_argument("--patience", type=int, default=criterion.DEFAULT_PATIENCE)
    p.add_argument("--out-prefix", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write synthetic samples, matrices or a whole trajectory")
    p.add_argument("kind")
    p.add_argument("params", nargs="*", help="key=value parameters")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("theory", help="numerical checks of the cross-entropy smoothness argument")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_theory)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except HTSentinelError as exc:
        _say(f"error: {exc}")
        return exc.exit_code
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        _say(f"numeric failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
