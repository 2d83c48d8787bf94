"""Batch pipeline front-end.

Each subcommand is a pure file-to-file transform: identical inputs and
flags produce byte-identical outputs (fixed float formatting, sorted JSON
keys, no timestamps). Exit codes: 0 ok, 1 data error (with a machine
readable error JSON on stderr), 2 usage error.

Typical chain:

    otcimpact simulate --config cfg.json --out run/
    otcimpact classify --trades run/trades.csv --quotes run/quotes.csv --out run/
    otcimpact estimate --signed run/signed.csv --out run/
    otcimpact propagator --autocorr run/autocorr.csv --response run/response.csv --out run/
    otcimpact report --signed run/signed.csv --out run/report.json
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .debias import debias_autocorr, debias_propagator, debias_response
from .domain import CurveKind, FitForm, LagCurve
from .errors import ImpactError, MissingInputError
from .estimators import (
    autocorr,
    bin_imbalance,
    bin_profile,
    n_eff,
    response,
    size_distribution,
    windowed_stats,
)
from .fitting import fit_stretched
from .ingest import load_tape, parse_quotes, rebase
from .multiprop import (
    category_autocorr,
    category_response,
    cross_corr,
    solve_multi,
    venue_scheme,
)
from .propagator import bound_lower, bound_upper, solve_propagator
from .serialize import (
    base_meta,
    config_hash,
    fit_to_payload,
    read_json,
    read_lagcurve,
    read_meta_comments,
    read_signed,
    write_json,
    write_kernel,
    write_lagcurve,
    write_signed,
    write_table,
)
from .signing import classify_all, label_accuracy
from .synth import config_from_json, make_dataset, write_dataset

DEFAULT_MAX_LAG = 60
DEFAULT_TRUNCATION = 30
DEFAULT_LAG_STAR = 30
DEFAULT_NEFF_TRUNCATION = 100
DEFAULT_WINDOW_NS = 30 * 24 * 3600 * 10**9
DEFAULT_BIN_WIDTH_NS = 15 * 60 * 10**9
PLATEAU_FROM, PLATEAU_TO = 20, 40


_PATH_ARGS = frozenset({"out", "func", "command", "trades", "quotes", "signed",
                        "autocorr", "response", "curve", "config"})


def _meta_for(args_dict: dict, seed="") -> dict:
    # hash only semantic parameters, not file locations, so identical inputs
    # give byte-identical outputs wherever they live
    hashable = {k: v for k, v in args_dict.items() if k not in _PATH_ARGS}
    return base_meta(cfg_hash=config_hash(hashable), seed=seed)


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"{what} not found", path=str(p))
    return p


def _inherit_seed(meta_in: dict):
    return meta_in.get("seed", "")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg_data = read_json(_require(args.config, "config"))
    cfg_data.pop("meta", None)
    if args.seed is not None:
        cfg_data["seed"] = args.seed
    config = config_from_json(cfg_data)
    tape, truth = make_dataset(config)
    meta = base_meta(cfg_hash=config_hash(cfg_data), seed=config.seed)
    paths = write_dataset(tape, truth, args.out, meta=meta)
    print(json.dumps({k: str(v) for k, v in sorted(paths.items())}))
    return 0


def cmd_classify(args) -> int:
    trades_path = _require(args.trades, "trades file")
    tape, warnings = load_tape(trades_path, _require(args.quotes, "quotes file"))
    signed, report = classify_all(tape, tie_policy=args.tie_policy,
                                  max_staleness_ns=args.max_staleness_ns)
    meta = _meta_for(vars(args), seed=_inherit_seed(read_meta_comments(trades_path)))
    out = Path(args.out)
    write_signed(out / "signed.csv", signed, tape.rebased.mean_spread, meta)
    payload = {
        "product": tape.product,
        "n_signed": report.n_signed,
        "n_dropped_no_quote": report.n_dropped_no_quote,
        "n_dropped_stale": report.n_dropped_stale,
        "n_dropped_tie": report.n_dropped_tie,
        "n_ties": report.n_ties,
        "warnings": list(warnings),
    }
    try:
        q_hat, n_labeled = label_accuracy(signed)
        payload["q_hat"] = q_hat
        payload["n_labeled"] = n_labeled
    except ImpactError:
        payload["q_hat"] = None
        payload["n_labeled"] = 0
    write_json(out / "classify_report.json", payload, meta)
    return 0


def cmd_estimate(args) -> int:
    signed, meta_in = read_signed(_require(args.signed, "signed file"))
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_in))
    out = Path(args.out)
    eps = [st.eps for st in signed]
    c_lag = max(args.max_lag, args.neff_truncation)
    c = autocorr(eps, c_lag, session_break_ns=args.session_break_ns)
    r = response(signed, args.max_lag, session_break_ns=args.session_break_ns)
    write_lagcurve(out / "autocorr.csv", c, meta)
    write_lagcurve(out / "response.csv", r, meta)

    windows = windowed_stats(signed, args.window_ns, lag_star=args.lag_star,
                             neff_truncation=args.neff_truncation)
    write_table(
        out / "windowed.csv",
        ("window_start", "window_end", "n_trades", "n_eff", "r_at", "low_sample"),
        ((w.window_start, w.window_end, w.n_trades, w.n_eff, w.r_at, w.low_sample)
         for w in windows),
        meta,
    )
    curve_rows = []
    for w in windows:
        if w.cum_autocorr is None:
            continue
        for lag in range(w.cum_autocorr.max_lag + 1):
            curve_rows.append((w.window_start, lag, w.cum_autocorr.values[lag],
                               w.cum_autocorr.counts[lag]))
    write_table(out / "windowed_curves.csv",
                ("window_start", "lag", "value", "count"), curve_rows, meta)

    sizes = size_distribution([st.trade for st in signed],
                              assign=lambda t: t.venue.value)
    size_rows = []
    for cat in sorted(sizes):
        d = sizes[cat]
        for i in range(len(d.masses)):
            size_rows.append((cat, d.mean_notional, d.edges[i], d.edges[i + 1],
                              d.masses[i]))
    write_table(out / "sizes.csv",
                ("category", "mean_notional", "bin_left", "bin_right", "mass"),
                size_rows, meta)

    payload = {
        "product": signed[0].trade.product if signed else "",
        "n_trades": len(signed),
        "n_eff": n_eff(c, args.neff_truncation),
        "r_at": r.value(args.lag_star),
        "lag_star": args.lag_star,
        "neff_truncation": args.neff_truncation,
    }
    write_json(out / "metrics.json", payload, meta)
    return 0


def cmd_propagator(args) -> int:
    c, meta_c = read_lagcurve(_require(args.autocorr, "autocorrelation file"))
    r, _ = read_lagcurve(_require(args.response, "response file"))
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_c))
    out = Path(args.out)
    solution = solve_propagator(c, r, args.truncation)
    neff = n_eff(c, min(args.neff_truncation, c.max_lag))
    lag_star = min(args.lag_star, r.max_lag)
    r_at = r.value(lag_star)
    lower, upper = bound_lower(r_at, neff), bound_upper(r_at, neff)
    g_at = solution.cumulative.value(lag_star)
    extra = {
        "n_eff": neff,
        "lag_star": lag_star,
        "r_at": r_at,
        "g_at": g_at,
        "bound_lower": lower,
        "bound_upper": upper,
        # bounds hold for large lags only; violations are diagnostics
        "bound_violation": bool(g_at < lower or g_at > upper),
        "plateau": solution.plateau(PLATEAU_FROM, min(PLATEAU_TO, solution.cumulative.max_lag)),
    }
    write_kernel(out / "propagator.csv", out / "propagator.json", solution, meta, extra)
    return 0


def cmd_debias(args) -> int:
    signed, meta_in = read_signed(_require(args.signed, "signed file"))
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_in))
    out = Path(args.out)
    if args.q_hat is not None:
        q_hat, n_labeled = args.q_hat, 0
    else:
        q_hat, n_labeled = label_accuracy(signed)

    eps = [st.eps for st in signed]
    c_naive = autocorr(eps, args.max_lag)
    r_naive = response(signed, args.max_lag)
    c_corr = debias_autocorr(signed, q_hat, args.max_lag)
    r_corr = debias_response(r_naive, q_hat)

    corr_meta = dict(meta)
    corr_meta["corrected"] = "true"
    write_lagcurve(out / "corrected_autocorr.csv", c_corr, corr_meta)
    write_lagcurve(out / "corrected_response.csv", r_corr, corr_meta)

    naive_sol = solve_propagator(c_naive, r_naive, args.truncation)
    corr_sol = debias_propagator(c_corr, r_corr, fit_first=not args.raw,
                                 truncation=args.truncation)
    write_kernel(out / "corrected_propagator.csv", out / "corrected_propagator.json",
                 corr_sol, corr_meta, {"q_hat": q_hat})

    hi = min(PLATEAU_TO, naive_sol.cumulative.max_lag)
    naive_plateau = naive_sol.plateau(PLATEAU_FROM, hi)
    corr_plateau = corr_sol.plateau(PLATEAU_FROM, hi)
    lag_star = min(args.lag_star, args.max_lag)
    payload = {
        "corrected": True,
        "q_hat": q_hat,
        "n_labeled": n_labeled,
        "naive_propagator_plateau": naive_plateau,
        "corrected_propagator_plateau": corr_plateau,
        "propagator_plateau_ratio": (corr_plateau / naive_plateau
                                     if naive_plateau else None),
        "naive_response_at": r_naive.value(lag_star),
        "corrected_response_at": r_corr.value(lag_star),
        "response_ratio": 1.0 / (2.0 * q_hat - 1.0),
        "lag_star": lag_star,
    }
    write_json(out / "debias.json", payload, corr_meta)
    return 0


def cmd_multiprop(args) -> int:
    signed, meta_in = read_signed(_require(args.signed, "signed file"))
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_in))
    out = Path(args.out)
    scheme = venue_scheme()
    cross = cross_corr(signed, scheme, args.max_lag)
    responses = category_response(signed, scheme, args.max_lag)
    autocorrs = category_autocorr(signed, scheme, args.max_lag)
    solution = solve_multi(cross, responses, args.truncation)

    resp_rows = []
    auto_rows = []
    prop_rows = []
    for cat in scheme.categories:
        rc, ac, pc = responses[cat], autocorrs[cat], solution.cumulative[cat]
        g = solution.increments[cat]
        for lag in range(args.max_lag + 1):
            resp_rows.append((cat, lag, rc.values[lag], rc.counts[lag]))
            auto_rows.append((cat, lag, ac.values[lag], ac.counts[lag]))
            g_at = g[lag - 1] if 1 <= lag <= solution.truncation else 0.0
            prop_rows.append((cat, lag, g_at, pc.values[lag]))
    write_table(out / "category_response.csv", ("category", "lag", "value", "count"),
                resp_rows, meta)
    write_table(out / "category_autocorr.csv", ("category", "lag", "value", "count"),
                auto_rows, meta)
    write_table(out / "category_propagator.csv", ("category", "lag", "g", "G"),
                prop_rows, meta)
    cross_rows = []
    for ri, rcat in enumerate(scheme.categories):
        for pi, pcat in enumerate(scheme.categories):
            for lag in range(cross.max_lag + 1):
                cross_rows.append((rcat, pcat, lag, cross.tensor[ri, pi, lag],
                                   cross.counts[lag]))
    write_table(out / "crosscorr.csv", ("rho", "pi", "lag", "value", "count"),
                cross_rows, meta)

    lag_star = min(args.lag_star, args.max_lag)
    neffs = {cat: n_eff(autocorrs[cat], min(DEFAULT_NEFF_TRUNCATION, args.max_lag))
             for cat in scheme.categories}
    payload = {
        "categories": list(scheme.categories),
        "probs": {cat: solution.probs[i] for i, cat in enumerate(scheme.categories)},
        "residual_norm": solution.residual_norm,
        "truncation": solution.truncation,
        "response_convention": "conditional_mean",
        "n_eff": neffs,
        "bounds": {
            cat: {
                "lower": bound_lower(responses[cat].value(lag_star), neffs[cat]),
                "upper": bound_upper(responses[cat].value(lag_star), neffs[cat]),
                "g_at": solution.cumulative[cat].value(lag_star),
            }
            for cat in scheme.categories
        },
        "lag_star": lag_star,
    }
    write_json(out / "multiprop.json", payload, meta)
    return 0


def cmd_bins(args) -> int:
    signed, meta_in = read_signed(_require(args.signed, "signed file"))
    quotes = parse_quotes(_require(args.quotes, "quotes file")).records
    series = rebase(quotes)
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_in))
    out = Path(args.out)
    bins = bin_imbalance(signed, series, args.width_ns)
    write_table(out / "bins.csv", ("bin_start", "imbalance", "ret", "n_trades"),
                ((b.bin_start, b.imbalance, b.ret, b.n_trades) for b in bins), meta)
    profile = bin_profile(bins, n_groups=args.groups, clip=args.clip)
    write_table(out / "profile.csv", ("group", "mean_x", "mean_y", "count"),
                ((i, profile.x[i], profile.y[i], profile.counts[i])
                 for i in range(len(profile.x))), meta)
    return 0


def cmd_fit(args) -> int:
    curve, meta_in = read_lagcurve(_require(args.curve, "curve file"))
    form = FitForm[args.form.upper()]
    params = fit_stretched(curve, form, min_lag=args.min_lag)
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_in))
    payload = fit_to_payload(params)
    payload["min_lag"] = args.min_lag
    payload["max_lag"] = curve.max_lag
    write_json(args.out, payload, meta)
    return 0


def cmd_report(args) -> int:
    signed, meta_in = read_signed(_require(args.signed, "signed file"))
    meta = _meta_for(vars(args), seed=_inherit_seed(meta_in))
    eps = [st.eps for st in signed]
    c = autocorr(eps, max(args.max_lag, args.neff_truncation))
    r = response(signed, args.max_lag)
    solution = solve_propagator(c, r, args.truncation)
    neff = n_eff(c, args.neff_truncation)
    lag_star = min(args.lag_star, args.max_lag)
    ts = np.array([st.trade.ts for st in signed], dtype=np.int64)
    intertrade_sec = float(np.mean(np.diff(ts))) / 1e9 if len(ts) > 1 else float("nan")
    product = signed[0].trade.product if signed else ""
    payload = {
        "products": {
            product: {
                "n_eff": neff,
                "r_30": r.value(lag_star),
                "g_30": solution.cumulative.value(lag_star),
                "avg_intertrade_sec": intertrade_sec,
                "n_trades": len(signed),
                "bound_lower": bound_lower(r.value(lag_star), neff),
                "bound_upper": bound_upper(r.value(lag_star), neff),
            }
        },
        "lag_star": lag_star,
    }
    write_json(args.out, payload, meta)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otcimpact",
                                     description="Price impact pipeline for OTC tapes")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_lags(p, truncation=True):
        p.add_argument("--max-lag", type=int, default=DEFAULT_MAX_LAG)
        if truncation:
            p.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION)
        p.add_argument("--lag-star", type=int, default=DEFAULT_LAG_STAR)

    p = sub.add_parser("simulate", help="generate a synthetic tape with ground truth")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classify", help="sign trades against prevailing mids")
    p.add_argument("--trades", required=True)
    p.add_argument("--quotes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tie-policy", choices=("carry", "drop"), default="carry")
    p.add_argument("--max-staleness-ns", type=int, default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("estimate", help="flow and response statistics")
    p.add_argument("--signed", required=True)
    p.add_argument("--out", required=True)
    add_common_lags(p, truncation=False)
    p.add_argument("--neff-truncation", type=int, default=DEFAULT_NEFF_TRUNCATION)
    p.add_argument("--window-ns", type=int, default=DEFAULT_WINDOW_NS)
    p.add_argument("--session-break-ns", type=int, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("propagator", help="deconvolve the impact kernel")
    p.add_argument("--autocorr", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--out", required=True)
    add_common_lags(p)
    p.add_argument("--neff-truncation", type=int, default=DEFAULT_NEFF_TRUNCATION)
    p.set_defaults(func=cmd_propagator)

    p = sub.add_parser("debias", help="correct curves for sign misclassification")
    p.add_argument("--signed", required=True)
    p.add_argument("--out", required=True)
    add_common_lags(p)
    p.add_argument("--q-hat", type=float, default=None)
    p.add_argument("--raw", action="store_true",
                   help="solve on raw corrected curves instead of fits")
    p.set_defaults(func=cmd_debias)

    p = sub.add_parser("multiprop", help="per-venue propagators")
    p.add_argument("--signed", required=True)
    p.add_argument("--out", required=True)
    add_common_lags(p)
    p.set_defaults(func=cmd_multiprop)

    p = sub.add_parser("bins", help="clock-time imbalance bins and profile")
    p.add_argument("--signed", required=True)
    p.add_argument("--quotes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width-ns", type=int, default=DEFAULT_BIN_WIDTH_NS)
    p.add_argument("--groups", type=int, default=30)
    p.add_argument("--clip", type=float, default=3.0)
    p.set_defaults(func=cmd_bins)

    p = sub.add_parser("fit", help="stretched-exponential fit of a lag curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--form", choices=("decay", "saturating"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-lag", type=int, default=1)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="single JSON metrics bundle")
    p.add_argument("--signed", required=True)
    p.add_argument("--out", required=True)
    add_common_lags(p)
    p.add_argument("--neff-truncation", type=int, default=DEFAULT_NEFF_TRUNCATION)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ImpactError as exc:
        sys.stderr.write(json.dumps(exc.to_json(), sort_keys=True, default=str) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
