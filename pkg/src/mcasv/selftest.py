"""Quick analytic-oracle checks runnable without pytest (``mcasv selftest``)."""

from __future__ import annotations

import math

import numpy as np

from mcasv.directional import delay_and_sum_grid, dpr_all
from mcasv.dsp import MultiChannelSignal, StftConfig, stft
from mcasv.evaluation import eer, min_dcf
from mcasv.geometry import MicPairSet, build_paper_array, builtin_pair_set
from mcasv.objectives import LossWeights, TripletConfig, compose_loss, cross_entropy, triplet_loss
from mcasv.sinc import SincFilterBank, materialize_filters
from mcasv.simulator import spatialize
from mcasv.spatial import SourceAngleTrack, angle_feature, ipd

FS = 16000


def _tone(freq=1000.0, n=FS // 2):
    return np.cos(2 * np.pi * freq * np.arange(n) / FS)


def check_geometry():
    g = build_paper_array()
    return abs(g.positions[7] - 0.28) < 1e-12 and abs(g.positions[14] - 0.56) < 1e-12


def check_ipd_delay():
    x = _tone()
    y = np.concatenate([np.zeros(2), x[:-2]])
    spec = stft(MultiChannelSignal(np.stack([x, y]), FS))
    raw = ipd(spec, MicPairSet("p", [(0, 1)]), "raw")[0, 2:, 32]
    return bool(np.all(np.abs(np.abs(raw) - math.pi / 4) < 0.02))


def check_angle_feature():
    g = build_paper_array()
    pairs = builtin_pair_set("v0")
    spec = stft(spatialize(_tone(), 60.0, g))
    af = angle_feature(spec, g, pairs, SourceAngleTrack.static(60.0, spec.n_frames))
    return bool(np.all(af[5:-5, 32] >= 0.95 * len(pairs)))


def check_dpr_normalized():
    g = build_paper_array()
    spec = stft(spatialize(_tone(500.0), 45.0, g))
    r = dpr_all(spec, delay_and_sum_grid(g, 10))
    return bool(np.allclose(r.sum(axis=0), 1.0, atol=1e-9))


def check_sinc_zero_filter():
    bank = SincFilterBank.from_cutoffs([500.0], [500.0])
    return bool(np.all(materialize_filters(bank) == 0.0))


def check_losses():
    loss, _ = cross_entropy(np.zeros((1, 9550)), [0])
    ok = abs(loss - math.log(9550)) < 1e-9
    ok &= compose_loss(1.0, 1.0, 1.0, LossWeights()) == 1.1005
    t, _ = triplet_loss(np.zeros(4), np.zeros(4), np.zeros(4), TripletConfig(margin=0.0))
    return bool(ok and abs(t - math.log(2)) < 1e-12)


def check_metrics():
    s = [0.9, 0.8, 0.7, 0.3, 0.2, 0.1]
    y = [1, 1, 1, 0, 0, 0]
    return eer(s, y) == 0.0 and min_dcf(s, y) == 0.0 and eer([0.5, 0.5], [1, 0]) == 0.5


CHECKS = {
    "geometry": check_geometry,
    "ipd_delay": check_ipd_delay,
    "angle_feature": check_angle_feature,
    "dpr_normalized": check_dpr_normalized,
    "sinc_zero_filter": check_sinc_zero_filter,
    "losses": check_losses,
    "metrics": check_metrics,
}


def run_selftest():
    results = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = bool(fn()), ""
        except Exception as exc:  # report, don't abort the run
            ok, detail = False, repr(exc)
        results.append({"check": name, "pass": ok, "detail": detail})
    return results
