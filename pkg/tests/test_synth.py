import numpy as np
import pytest

from trucktraffic.synth import SynthConfig, generate_corpus, write_corpus


def test_fixed_seed_deterministic():
    c = SynthConfig(n_links=300, seed=42)
    l1, b1, t1 = generate_corpus(c)
    l2, b2, t2 = generate_corpus(c)
    assert [l.link_id for l in l1] == [l.link_id for l in l2]
    assert [(l.aadt_total, l.aadt_mdv, l.aadt_hdv) for l in l1] \
        == [(l.aadt_total, l.aadt_mdv, l.aadt_hdv) for l in l2]
    assert t1.state_mult == t2.state_mult


def test_class_sums_never_exceed_total():
    links, _, _ = generate_corpus(SynthConfig(n_links=3000, seed=1,
                                              missing_frac=0.0,
                                              single_missing_frac=0.0))
    for l in links:
        assert l.aadt_mdv + l.aadt_hdv <= l.aadt_total * (1 + 1e-12)


def test_generated_shares_match_configured_rates():
    links, _, truth = generate_corpus(SynthConfig(
        n_links=12000, seed=2, missing_frac=0.0, single_missing_frac=0.0))
    for fc in (1, 5):
        ratios, expected = [], []
        for l in links:
            if l.functional_class != fc or l.aadt_total <= 0:
                continue
            ratios.append(l.aadt_mdv / l.aadt_total)
            expected.append(truth.expected_rate("mdv", fc, l.state_fips,
                                                l.county_fips))
        assert np.mean(ratios) == pytest.approx(np.mean(expected), rel=0.05)


def test_missing_fractions_applied():
    links, _, _ = generate_corpus(SynthConfig(n_links=4000, seed=3,
                                              missing_frac=0.3,
                                              single_missing_frac=0.05))
    both_missing = sum(1 for l in links
                       if l.aadt_mdv is None and l.aadt_hdv is None)
    one_missing = sum(1 for l in links
                      if (l.aadt_mdv is None) != (l.aadt_hdv is None))
    assert both_missing / len(links) == pytest.approx(0.3, abs=0.03)
    assert one_missing / len(links) == pytest.approx(0.05, abs=0.02)


def test_blocks_are_unit_squares_with_unique_geoids():
    _, blocks, _ = generate_corpus(SynthConfig(n_links=10, seed=4, block_grid=3))
    geoids = [b.geoid for b in blocks]
    assert len(set(geoids)) == len(geoids)
    for b in blocks:
        assert b.area_km2 == pytest.approx(1.0, rel=1e-9)
        assert len(b.geoid) == 15


def test_fc7_fraction_generated():
    links, _, _ = generate_corpus(SynthConfig(n_links=2000, seed=5,
                                              functional_class_7_frac=0.1))
    frac = sum(1 for l in links if l.functional_class == 7) / len(links)
    assert frac == pytest.approx(0.1, abs=0.03)
    for l in links:
        if l.functional_class == 7:
            assert l.aadt_mdv is None and l.aadt_hdv is None


def test_rate_knee_lifts_shares_above_threshold():
    cfg = SynthConfig(n_links=8000, seed=9, missing_frac=0.0,
                      single_missing_frac=0.0, rate_knee=0.6, total_sigma=0.5)
    links, _, truth = generate_corpus(cfg)
    lo, hi = [], []
    for l in links:
        if l.functional_class != 5 or l.aadt_total <= 0:
            continue
        share = l.aadt_mdv / l.aadt_total
        mult = truth.state_mult[l.state_fips] * truth.county_mult[l.county_fips]
        if l.aadt_total > truth.knee_threshold[5]:
            hi.append(share / mult)
        else:
            lo.append(share / mult)
    assert np.mean(hi) / np.mean(lo) == pytest.approx(1.6, rel=0.05)


def test_total_sigma_controls_spread():
    wide, _, _ = generate_corpus(SynthConfig(n_links=6000, seed=1,
                                             total_sigma=0.8))
    narrow, _, _ = generate_corpus(SynthConfig(n_links=6000, seed=1,
                                               total_sigma=0.3))

    def spread(links):  # within one class so the per-class levels cancel
        vals = [l.aadt_total for l in links
                if l.functional_class == 5 and l.aadt_total > 0]
        return np.std(np.log(vals))

    assert spread(wide) > spread(narrow) * 1.5


def test_write_corpus_files(tmp_path):
    links, blocks, truth = generate_corpus(SynthConfig(n_links=50, seed=6,
                                                       block_grid=1))
    paths = write_corpus(links, blocks, truth, tmp_path)
    assert paths["links"].exists()
    assert paths["blocks"].exists()
    assert paths["truth"].exists()
    header = paths["links"].read_text(encoding="utf-8").splitlines()[0]
    assert header == ("link_id,state_fips,county_fips,functional_class,"
                      "urban_code,through_lanes,length_km,aadt_total,"
                      "aadt_mdv,aadt_hdv,geometry_wkt")
