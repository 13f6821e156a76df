import numpy as np
import pytest

from conftest import FS, tone
from mcasv.dsp import MultiChannelSignal
from mcasv.formats import encode_feature_stack, read_feature_file, write_feature_file
from mcasv.pipeline import (
    PipelineConfig, UndefinedOnCleanError, bank_from_stack, bank_to_stack, run_pipeline,
)
from mcasv.simulator import spatialize
from mcasv.sinc import SincFilterBank

META = {"angles": {"target": 60.0, "noise": 120.0}}
CLEAN = {"angles": {"target": 60.0}}


@pytest.fixture(scope="module")
def mixture():
    from mcasv.geometry import build_paper_array
    g = build_paper_array()
    rng = np.random.default_rng(0)
    target = spatialize(rng.standard_normal(6000), 60.0, g).samples
    noise = spatialize(rng.standard_normal(6000), 120.0, g).samples
    return MultiChannelSignal(target + 0.3 * noise, FS)


def test_table1_best_row_composition(mixture):
    stack = run_pipeline(mixture, META, PipelineConfig(["lps", "cosipd(v0)", "dpr(1)", "af(1)"]))
    assert len(stack) == 9
    assert stack.widths == [257] * 9
    assert stack.labels[0] == "lps" and stack.labels[-2:] == ["dpr:target", "af:target"]
    assert stack.as_array().shape == (9, (6000 - 400) // 160 + 1, 257)


def test_fbank_alone(mixture):
    stack = run_pipeline(mixture, META, PipelineConfig(["fbank80"]))
    assert len(stack) == 1 and stack.widths == [80]


@pytest.mark.parametrize("features,count", [
    (["lps"], 1), (["cosipd(v0)"], 6), (["sinipd(v1)"], 8), (["cosipd(v2)"], 10),
    (["phase0"], 1), (["dpr(1)"], 1), (["af(1)"], 1), (["dpr(2)"], 2), (["af(2)"], 2),
    (["multchansinc"], 7),
])
def test_plane_counts(mixture, features, count):
    stack = run_pipeline(mixture, META, PipelineConfig(features))
    assert len(stack) == count


def test_second_source_falls_back_to_noise(mixture):
    stack = run_pipeline(mixture, META, PipelineConfig(["af(2)"]))
    assert stack.labels == ["af:target", "af:noise"]
    with_interf = {"angles": {"target": 60.0, "interference": 30.0, "noise": 120.0}}
    stack = run_pipeline(mixture, with_interf, PipelineConfig(["dpr(2)"]))
    assert stack.labels == ["dpr:target", "dpr:interference"]


@pytest.mark.parametrize("feature", ["dpr(2)", "af(2)"])
def test_undefined_on_clean(mixture, feature):
    with pytest.raises(UndefinedOnCleanError, match="undefined-on-clean"):
        run_pipeline(mixture, CLEAN, PipelineConfig(["lps", feature]))


@pytest.mark.parametrize("features", [[], ["lps", "lps"], ["ipd(v0)"], ["cosipd(v9)"],
                                      ["fbank80", "lps"]])
def test_config_validation(features):
    with pytest.raises(ValueError):
        PipelineConfig(features)


def test_plane_order_follows_config(mixture, tmp_path):
    cfg = PipelineConfig(["af(1)", "lps", "sinipd(v0)"])
    stack = run_pipeline(mixture, META, cfg)
    assert stack.labels[:2] == ["af:target", "lps"]
    assert stack.labels[2:] == [f"sinipd(v0)[{i},{j}]" for i, j in
                                [(0, 7), (2, 7), (3, 11), (5, 9), (11, 5), (9, 3)]]
    write_feature_file(stack, tmp_path / "f.mcft")
    assert read_feature_file(tmp_path / "f.mcft").labels == stack.labels


def test_deterministic_bytes(mixture):
    cfg = PipelineConfig(["lps", "cosipd(v0)", "dpr(1)", "af(1)"])
    a = encode_feature_stack(run_pipeline(mixture, META, cfg))
    b = encode_feature_stack(run_pipeline(mixture, META, cfg))
    assert a == b


def test_normalization_flag(mixture):
    stack = run_pipeline(mixture, META, PipelineConfig(["lps", "af(1)"], normalize=True))
    for p in stack.planes:
        assert abs(float(p.mean())) < 1e-4 and abs(float(p.std()) - 1) < 1e-3


def test_config_json_roundtrip():
    cfg = PipelineConfig(["lps", "cosipd(v2)"], n_looks=12)
    assert PipelineConfig.from_json(cfg.to_json()) == cfg


def test_channel_count_mismatch():
    with pytest.raises(ValueError):
        run_pipeline(MultiChannelSignal(np.zeros((4, 2000)), FS), META, PipelineConfig(["lps"]))


def test_sinc_bank_roundtrip(tmp_path):
    bank = SincFilterBank.tiled(257)
    write_feature_file(bank_to_stack(bank), tmp_path / "bank.mcft")
    back = bank_from_stack(read_feature_file(tmp_path / "bank.mcft"))
    assert back.taps == bank.taps and back.sample_rate == bank.sample_rate
    np.testing.assert_array_equal(back.raw_low, bank.raw_low.astype(np.float32))
    np.testing.assert_array_equal(back.raw_band, bank.raw_band.astype(np.float32))


def test_tone_lps_peak(mixture):
    from mcasv.geometry import build_paper_array
    sig = spatialize(tone(1000.0), 60.0, build_paper_array())
    stack = run_pipeline(sig, CLEAN, PipelineConfig(["lps"]))
    assert np.all(np.argmax(stack.planes[0], axis=1) == 32)
