"""Synthetic order-flow generator with known ground truth.

Signs come from metaorder splitting: runs of a uniform random sign whose
lengths are geometric with continuation probability phi, which makes the
sign autocorrelation exactly phi^l and the effective order count 1/(1-phi).
Mids follow the linear impact model driven by the true signs and a chosen
kernel, trade prices sit half a spread away from the mid on the trade's
side, and an "as-reported" sign channel flips the true sign independently
with probability 1-q for debias tests that bypass the price classifier.

Generated tapes round-trip the CSV schema of :mod:`otcimpact.ingest`: mid
paths are recentred additively to sample mean 10^4 before being written as
quote spreads, so the ingest rebase reproduces them exactly and kernel
units survive the file round trip (only price differences matter, so the
shift is invisible to every estimator).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domain import (
    REBASE_LEVEL,
    Kernel,
    Quote,
    RebasedSeries,
    SynthConfig,
    Tape,
    Trade,
    Venue,
)
from .errors import ValidationError


def gen_signs(n: int, phi: float, rng: np.random.Generator,
              phi_mix: Optional[float] = None, phi_mix_weight: float = 0.0) -> np.ndarray:
    """Metaorder-split sign sequence; C(l) = phi^l, N_eff = 1/(1-phi).

    Run lengths are geometric with continuation probability phi:
    P(len = k) = (1-phi) * phi^(k-1). With ``phi_mix`` set, each run draws
    its continuation probability from {phi, phi_mix} (the second with
    probability ``phi_mix_weight``), which roughens the decay toward the
    stretched-exponential shapes seen on real tapes.
    """
    out = np.empty(n, dtype=np.int8)
    i = 0
    while i < n:
        run_phi = phi
        if phi_mix is not None and rng.random() < phi_mix_weight:
            run_phi = phi_mix
        sign = 1 if rng.random() < 0.5 else -1
        length = 1 if run_phi == 0.0 else int(rng.geometric(1.0 - run_phi))
        j = min(n, i + length)
        out[i:j] = sign
        i = j
    return out


def gen_prices(
    signs: np.ndarray,
    kernel: Kernel,
    noise_sd: float,
    rng: np.random.Generator,
    categories: Optional[np.ndarray] = None,
    off_kernel: Optional[Kernel] = None,
) -> np.ndarray:
    """Mid path of the impact model: mids[t] is the mid just before trade t.

    mids[t+1] - mids[t] = sum_k g(k) * signs[t+1-k] + noise_t, starting at
    10^4. With ``categories`` (0 = base kernel, 1 = off kernel) each past
    trade contributes through its own category's kernel.
    """
    n = len(signs)
    s = np.asarray(signs, dtype=np.float64)
    if categories is None:
        inc = np.convolve(s, kernel.g)[: n - 1] if n > 1 else np.zeros(0)
    else:
        if off_kernel is None:
            raise ValidationError("BAD_CATEGORY", "categories require off_kernel")
        cat = np.asarray(categories)
        base = np.convolve(s * (cat == 0), kernel.g)[: n - 1]
        off = np.convolve(s * (cat == 1), off_kernel.g)[: n - 1]
        inc = base + off if n > 1 else np.zeros(0)
    if noise_sd > 0:
        inc = inc + rng.normal(0.0, noise_sd, size=len(inc))
    mids = np.empty(n)
    mids[0] = REBASE_LEVEL
    np.cumsum(inc, out=mids[1:])
    mids[1:] += REBASE_LEVEL
    return mids


def reported_signs(true_signs: np.ndarray, q: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each true sign independently with probability 1 - q."""
    flips = rng.random(len(true_signs)) < (1.0 - q)
    return np.where(flips, -true_signs, true_signs).astype(np.int8)


@dataclass(frozen=True)
class GroundTruth:
    """Everything a test harness needs to score estimates of this tape."""

    config: SynthConfig
    true_signs: np.ndarray
    reported: np.ndarray
    mids: np.ndarray
    categories: Optional[np.ndarray]

    @property
    def n_eff(self) -> float:
        return 1.0 / (1.0 - self.config.phi)

    def to_json_dict(self) -> dict:
        cfg = self.config
        out = {
            "n_trades": cfg.n_trades,
            "phi": cfg.phi,
            "n_eff": self.n_eff,
            "kernel_g": list(cfg.kernel.g),
            "g_inf": cfg.kernel.g_inf,
            "noise_sd": cfg.noise_sd,
            "q": cfg.q,
            "half_spread": cfg.half_spread,
            "seed": cfg.seed,
            "product": cfg.product,
        }
        if cfg.off_kernel is not None:
            out["off_kernel_g"] = list(cfg.off_kernel.g)
            out["off_g_inf"] = cfg.off_kernel.g_inf
            out["p_off"] = cfg.p_off
        return out


def make_dataset(config: SynthConfig) -> tuple[Tape, GroundTruth]:
    """Generate a full tape (trades + quotes) with its ground truth.

    Deterministic for a fixed seed. Quotes are placed halfway between
    trades so the strict prevailing-mid rule picks up exactly the generated
    mid path; trade notionals are exponential; labels are attached to the
    configured fraction of trades.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_trades
    true = gen_signs(n, config.phi, rng, config.phi_mix, config.phi_mix_weight)

    categories = None
    if config.off_kernel is not None:
        categories = (rng.random(n) < config.p_off).astype(np.int8)

    mids = gen_prices(true, config.kernel, config.noise_sd, rng,
                      categories=categories, off_kernel=config.off_kernel)
    # recentre so the quote-file rebase is an exact no-op (differences survive)
    mids = mids + (REBASE_LEVEL - float(np.mean(mids)))
    if np.any(mids <= 0):
        raise ValidationError("BAD_SYNTH_PATH",
                              "mid path crosses zero; lower noise_sd or n_trades")

    prices = mids + config.half_spread * true
    if config.trade_noise_sd > 0:
        prices = prices + rng.normal(0.0, config.trade_noise_sd, size=n)
    if np.any(prices <= 0):
        raise ValidationError("BAD_SYNTH_PATH", "trade price crosses zero")

    reported = reported_signs(true, config.q, rng)
    notionals = rng.exponential(config.notional_mean, size=n)
    labeled = rng.random(n) < config.label_fraction

    dt = config.intertrade_ns
    trade_ts = config.start_ts + dt * np.arange(1, n + 1, dtype=np.int64)
    quote_ts = trade_ts - dt // 2

    trades = []
    for i in range(n):
        venue = Venue.ON_SEF
        if categories is not None and categories[i] == 1:
            venue = Venue.OFF_SEF
        trades.append(Trade(
            id=str(i),
            ts=int(trade_ts[i]),
            product=config.product,
            spread=float(prices[i]),
            notional=float(notionals[i]),
            venue=venue,
            true_sign=int(true[i]) if labeled[i] else None,
        ))
    series = RebasedSeries(product=config.product, mean_spread=float(np.mean(mids)),
                           ts=quote_ts, m=mids)
    tape = Tape(product=config.product, trades=tuple(trades), rebased=series)
    truth = GroundTruth(config=config, true_signs=true, reported=reported,
                        mids=mids, categories=categories)
    return tape, truth


def write_dataset(tape: Tape, truth: GroundTruth, out_dir,
                  meta: Optional[dict] = None) -> dict[str, Path]:
    """Emit trades.csv / quotes.csv in the ingest schema plus ground_truth.json.

    ``meta`` key/value pairs become `# key: value` comment lines that the
    ingest parser skips.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trades_path = out / "trades.csv"
    quotes_path = out / "quotes.csv"
    truth_path = out / "ground_truth.json"
    header = "".join(f"# {k}: {v}\n" for k, v in sorted((meta or {}).items()))

    with trades_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        fh.write("ts_ns,product,spread_bps,notional,venue,true_sign\n")
        for t in tape.trades:
            label = "" if t.true_sign is None else str(t.true_sign)
            fh.write(f"{t.ts},{t.product},{t.spread:.15g},{t.notional:.15g},"
                     f"{t.venue.value},{label}\n")
    with quotes_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        fh.write("ts_ns,product,spread_bps\n")
        for ts, m in zip(tape.rebased.ts, tape.rebased.m):
            fh.write(f"{ts},{tape.product},{m:.15g}\n")
    with truth_path.open("w", encoding="utf-8", newline="") as fh:
        doc = {"meta": dict(meta or {})}
        doc.update(truth.to_json_dict())
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"trades": trades_path, "quotes": quotes_path, "ground_truth": truth_path}


def config_from_json(data: dict) -> SynthConfig:
    """Build a SynthConfig from the CLI's JSON representation."""
    kernel = Kernel(g=tuple(data["kernel_g"]))
    off_kernel = Kernel(g=tuple(data["off_kernel_g"])) if "off_kernel_g" in data else None
    known = dict(
        n_trades=int(data["n_trades"]),
        phi=float(data["phi"]),
        kernel=kernel,
        noise_sd=float(data.get("noise_sd", 0.0)),
        q=float(data.get("q", 1.0)),
        half_spread=float(data.get("half_spread", 0.0)),
        seed=int(data.get("seed", 0)),
        notional_mean=float(data.get("notional_mean", 1e6)),
        label_fraction=float(data.get("label_fraction", 1.0)),
        trade_noise_sd=float(data.get("trade_noise_sd", 0.0)),
        product=str(data.get("product", "SYNTH")),
        off_kernel=off_kernel,
        p_off=float(data.get("p_off", 0.0)),
    )
    if "intertrade_ns" in data:
        known["intertrade_ns"] = int(data["intertrade_ns"])
    if "start_ts" in data:
        known["start_ts"] = int(data["start_ts"])
    if data.get("phi_mix") is not None:
        known["phi_mix"] = float(data["phi_mix"])
        known["phi_mix_weight"] = float(data.get("phi_mix_weight", 0.5))
    return SynthConfig(**known)
