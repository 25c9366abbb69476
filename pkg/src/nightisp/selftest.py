"""Embedded property suites behind the `selftest` subcommand.

Each suite re-derives its expectations independently of the code under
test (hand formulas, brute-force oracles, published conformance data), so
a silent numerical regression anywhere in the math stack turns the
command red.  The transform arguments exist so tests can inject broken
implementations and prove the suites actually detect faults.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .color_hvi import hvi_to_rgb, rgb_to_hvi
from .losses import alpha_coefficient, fdm_loss
from .metrics import ciede2000
from .wavelet import dwt2_haar, idwt2_haar

# Published CIEDE2000 conformance pairs:
# (L1, a1, b1, L2, a2, b2, expected dE00 to 4 decimals).
CIEDE2000_CONFORMANCE = (
    (50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425),
    (50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615),
    (50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412),
    (50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000),
    (50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000),
    (50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000),
    (50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669),
    (50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195),
    (50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045),
    (50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045),
    (50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461),
    (50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065),
    (50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492),
    (50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977),
    (50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030),
    (50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535),
    (50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000),
    (50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000),
    (50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000),
    (50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000),
    (60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644),
    (63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630),
    (61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731),
    (35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645),
    (22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373),
    (36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146),
    (90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441),
    (90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381),
    (6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377),
    (2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082),
)


@dataclass
class SuiteResult:
    name: str
    cases: int
    failures: int
    first_failure: str | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0


class _Recorder:
    def __init__(self, name):
        self.result = SuiteResult(name=name, cases=0, failures=0)

    def check(self, ok: bool, describe) -> None:
        self.result.cases += 1
        if not ok:
            self.result.failures += 1
            if self.result.first_failure is None:
                self.result.first_failure = describe() if callable(describe) else describe


def fdm_rank_oracle(f_pred, f_gt) -> float:
    """O(n^2) literal evaluation: each predicted value is compared against
    the ground-truth value at its own (stable) rank."""
    f_pred = np.asarray(f_pred, dtype=float)
    gs = np.sort(np.asarray(f_gt, dtype=float), kind="stable")
    n = f_pred.size
    terms = []
    for i in range(n):
        rank = 0
        for j in range(n):
            if f_pred[j] < f_pred[i] or (f_pred[j] == f_pred[i] and j < i):
                rank += 1
        d = f_pred[i] - gs[rank]
        terms.append(d * d)
    return math.fsum(terms) / n


def wavelet_suite(dwt=dwt2_haar, idwt=idwt2_haar, trials: int = 200) -> SuiteResult:
    rec = _Recorder("wavelet_perfect_reconstruction")
    rng = np.random.default_rng(101)
    for t in range(trials):
        plane = rng.uniform(-1.0, 1.0, size=(32, 32))
        bands = dwt(plane)
        recon = idwt(bands)
        err = float(np.max(np.abs(recon - plane)))
        rec.check(err <= 1e-6, lambda t=t, err=err: f"trial {t}: recon error {err:.3e}")
        e_in = float(np.sum(plane**2))
        e_out = float(
            sum(np.sum(b**2) for b in (bands.ll, bands.lh, bands.hl, bands.hh))
        )
        rel = abs(e_out - e_in) / e_in
        rec.check(rel <= 1e-6, lambda t=t, rel=rel: f"trial {t}: energy drift {rel:.3e}")
    return rec.result


def hvi_suite(forward=rgb_to_hvi, inverse=hvi_to_rgb, pixels: int = 20000) -> SuiteResult:
    rec = _Recorder("hvi_round_trip")
    rng = np.random.default_rng(202)
    shape = (3, 100, pixels // 100)
    for k in (0.5, 1.0, 2.0):
        rgb = rng.uniform(0.0, 1.0, size=shape)
        mx = rgb.max(axis=0)
        dim = mx < 0.01  # keep intensity above the invertibility floor
        rgb[:, dim] = np.clip(rgb[:, dim] + 0.01, 0.0, 1.0)
        back = inverse(forward(rgb, k))
        err = float(np.max(np.abs(back - rgb)))
        rec.check(err <= 1e-5, lambda k=k, err=err: f"k={k}: round-trip error {err:.3e}")

        gray = np.broadcast_to(rng.uniform(0.0, 1.0, size=shape[1:]), shape).copy()
        out = forward(gray, k)
        zero = bool(np.all(out.h == 0.0) and np.all(out.v == 0.0))
        rec.check(zero, lambda k=k: f"k={k}: gray input produced nonzero chroma")
    return rec.result


def ciede2000_suite(fn=ciede2000) -> SuiteResult:
    rec = _Recorder("ciede2000_conformance")
    for row in CIEDE2000_CONFORMANCE:
        lab1, lab2, want = row[:3], row[3:6], row[6]
        got = float(fn(np.asarray(lab1), np.asarray(lab2)))
        rec.check(
            abs(got - want) <= 1e-4,
            lambda lab1=lab1, lab2=lab2, got=got, want=want:
                f"lab1={lab1} lab2={lab2}: got {got:.5f}, want {want:.4f}",
        )
    return rec.result


def fdm_suite(fn=fdm_loss, trials: int = 100) -> SuiteResult:
    rec = _Recorder("fdm_oracle_equivalence")
    rng = np.random.default_rng(303)
    sizes = (1, 2, 17, 64)
    for t in range(trials):
        n = sizes[t % len(sizes)]
        pred = rng.normal(size=n)
        gt = rng.normal(size=n)
        if t % 3 == 0:
            pred = np.round(pred, 1)  # force duplicate values
            gt = np.round(gt, 1)
        got = fn(pred, gt)
        want = fdm_rank_oracle(pred, gt)
        rec.check(
            got == want,
            lambda t=t, got=got, want=want, pred=pred, gt=gt:
                f"trial {t}: {got!r} != oracle {want!r} (pred={pred!r})",
        )
    for t in range(50):
        base = rng.normal(size=32)
        perm = rng.permutation(base)
        got = fn(perm, base)
        rec.check(got == 0.0, lambda t=t, got=got: f"permutation trial {t}: loss {got!r} != 0")
    return rec.result


def alpha_suite(fn=alpha_coefficient, trials: int = 200) -> SuiteResult:
    rec = _Recorder("alpha_properties")
    rng = np.random.default_rng(404)
    for t in range(trials):
        pred = rng.uniform(0.0, 1.0, size=(3, 8, 8))
        gt = rng.uniform(0.0, 1.0, size=(3, 8, 8))
        a = fn(pred, gt)
        rec.check(a >= 1.0, lambda t=t, a=a: f"trial {t}: alpha {a!r} < 1")
        rec.check(
            fn(gt, pred) == a,
            lambda t=t: f"trial {t}: alpha not swap-invariant",
        )
    img = rng.uniform(0.0, 1.0, size=(3, 8, 8))
    rec.check(fn(img, img.copy()) == 1.0, "equal means: alpha != 1.0")
    a = fn(np.full((1, 8, 8), 0.1), np.full((1, 8, 8), 0.2))
    rec.check(abs(a - 2.0) <= 1e-9, lambda a=a: f"0.2/0.1 case: alpha {a!r} != 2.0")
    return rec.result


SUITES = (wavelet_suite, hvi_suite, ciede2000_suite, fdm_suite, alpha_suite)


def run_all() -> list:
    return [suite() for suite in SUITES]
