import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trucktraffic.core import (
    DEFAULT_HDV_PARAMS,
    DEFAULT_MDV_PARAMS,
    Hyperparameters,
    Provenance,
    VehicleClass,
)
from trucktraffic.impute import (
    derive_ldv,
    read_imputed_csv,
    run_imputation,
    split_observed_missing,
    write_imputed_csv,
)
from trucktraffic.synth import SynthConfig, generate_corpus

from conftest import make_link

FAST = Hyperparameters(n_estimators=8)


class TestSplit:
    def test_all_observed(self):
        links = [make_link(f"l{i}", mdv=1.0) for i in range(5)]
        obs, miss = split_observed_missing(links, VehicleClass.MDV)
        assert len(obs) == 5 and miss == []

    def test_all_missing(self):
        links = [make_link(f"l{i}") for i in range(4)]
        obs, miss = split_observed_missing(links, VehicleClass.MDV)
        assert obs == [] and len(miss) == 4

    def test_mixed(self):
        links = [make_link(f"l{i}", mdv=1.0 if i < 7 else None)
                 for i in range(10)]
        obs, miss = split_observed_missing(links, VehicleClass.MDV)
        assert (len(obs), len(miss)) == (7, 3)
        assert set(l.link_id for l in obs).isdisjoint(
            l.link_id for l in miss)


class TestDeriveLdv:
    def test_plain_subtraction(self):
        assert derive_ldv(1000.0, 100.0, 200.0) == (700.0, 100.0, 200.0, False)

    def test_rescale_when_classes_overshoot(self):
        ldv, mdv, hdv, flag = derive_ldv(1000.0, 800.0, 400.0)
        assert flag and ldv == 0.0
        assert mdv == pytest.approx(1000 * 800 / 1200)
        assert hdv == pytest.approx(1000 * 400 / 1200)
        assert mdv + hdv == pytest.approx(1000.0)

    def test_zero_classes(self):
        assert derive_ldv(1000.0, 0.0, 0.0) == (1000.0, 0.0, 0.0, False)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            derive_ldv(100.0, -1.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(total=st.floats(0, 1e6, allow_nan=False),
           mdv=st.floats(0, 1e6, allow_nan=False),
           hdv=st.floats(0, 1e6, allow_nan=False))
    def test_class_sum_identity_property(self, total, mdv, hdv):
        ldv, m2, h2, _ = derive_ldv(total, mdv, hdv)
        assert ldv >= 0 and m2 >= 0 and h2 >= 0
        assert ldv + m2 + h2 == pytest.approx(total, rel=1e-9, abs=1e-9)


class TestRunImputation:
    def test_no_missing_is_noop_plus_ldv(self, small_corpus):
        links, _, _ = small_corpus
        sub = links[:100]
        result = run_imputation(sub, FAST, FAST, seed=0)
        for before, after in zip(sub, result.links):
            assert after.aadt_mdv == before.aadt_mdv
            assert after.aadt_hdv == before.aadt_hdv
            assert after.aadt_ldv == pytest.approx(
                before.aadt_total - before.aadt_mdv - before.aadt_hdv)
            assert after.ldv_provenance is Provenance.DERIVED
        assert result.stats.predicted_mdv == 0

    def test_observed_values_never_modified(self, mixed_corpus):
        links, _, _ = mixed_corpus
        sub = links[:600]
        result = run_imputation(sub, FAST, FAST, seed=1)
        for before, after in zip(sub, result.links):
            if before.aadt_mdv is not None:
                assert after.aadt_mdv == before.aadt_mdv
                assert after.mdv_provenance is Provenance.OBSERVED
            if before.aadt_hdv is not None:
                assert after.aadt_hdv == before.aadt_hdv

    def test_provenance_predicted_iff_missing(self, mixed_corpus):
        links, _, _ = mixed_corpus
        sub = links[:600]
        result = run_imputation(sub, FAST, FAST, seed=1)
        for before, after in zip(sub, result.links):
            if before.functional_class > 6:
                continue
            assert (after.mdv_provenance is Provenance.PREDICTED) \
                == (before.aadt_mdv is None)
            assert (after.hdv_provenance is Provenance.PREDICTED) \
                == (before.aadt_hdv is None)

    def test_class_sum_identity_on_all_outputs(self, mixed_corpus):
        links, _, _ = mixed_corpus
        result = run_imputation(links[:600], FAST, FAST, seed=2)
        for link in result.links:
            if link.functional_class > 6:
                continue
            assert link.aadt_mdv is not None and link.aadt_hdv is not None
            assert link.aadt_ldv is not None and link.aadt_ldv >= 0
            total = link.aadt_ldv + link.aadt_mdv + link.aadt_hdv
            assert total == pytest.approx(link.aadt_total, rel=1e-6, abs=1e-9)

    def test_memorization_config_recovers_unique_match(self):
        # one missing link identical in features to a unique observed link;
        # bootstrap-disabled models (the documented hook) memorize exactly
        from trucktraffic.forest import fit_forest

        observed = [make_link(f"o{i}", total=float(100 * (i + 1)),
                              mdv=float(7 * (i + 1)), hdv=float(3 * (i + 1)),
                              fc=(i % 6) + 1)
                    for i in range(12)]
        twin = make_link("twin", total=500.0, fc=5)  # matches o4's features
        ref = observed[4]
        assert (ref.aadt_total, ref.functional_class) == (500.0, 5)
        mem = Hyperparameters(n_estimators=3)
        models = {
            t: fit_forest(observed, t, mem, seed=0, bootstrap=False)
            for t in (VehicleClass.MDV, VehicleClass.HDV)
        }
        result = run_imputation(observed + [twin], mem, mem, seed=0,
                                models=models)
        out = result.links[-1]
        assert out.aadt_mdv == pytest.approx(ref.aadt_mdv, rel=1e-12)
        assert out.aadt_hdv == pytest.approx(ref.aadt_hdv, rel=1e-12)

    def test_class_share_recovery_on_synthetic_corpus(self):
        links, _, truth = generate_corpus(SynthConfig(
            n_links=6000, seed=77, missing_frac=0.35, single_missing_frac=0.0,
            block_grid=1))
        result = run_imputation(links, DEFAULT_MDV_PARAMS, DEFAULT_HDV_PARAMS,
                                seed=5)
        by_fc_pred = {}
        by_fc_true = {}
        for before, after in zip(links, result.links):
            if before.aadt_mdv is not None or before.functional_class > 6:
                continue
            if before.aadt_total <= 0:
                continue
            fc = before.functional_class
            by_fc_pred.setdefault(fc, []).append(after.aadt_mdv / before.aadt_total)
            by_fc_true.setdefault(fc, []).append(truth.expected_rate(
                "mdv", fc, before.state_fips, before.county_fips))
        for fc in (1, 5):
            got = float(np.mean(by_fc_pred[fc]))
            want = float(np.mean(by_fc_true[fc]))
            assert got == pytest.approx(want, rel=0.10), fc

    def test_predicted_overshoot_rescaled_not_rejected(self):
        # identical features except a tiny total: predictions inherit the big
        # links' class volumes and must be rescaled, never raise
        observed = [make_link(f"o{i}", total=1000.0, mdv=400.0, hdv=400.0)
                    for i in range(10)]
        needy = make_link("tiny", total=50.0)
        result = run_imputation(observed + [needy], FAST, FAST, seed=0)
        out = result.links[-1]
        assert out.rescaled
        assert out.aadt_ldv == 0.0
        assert out.aadt_mdv + out.aadt_hdv == pytest.approx(50.0, rel=1e-9)
        assert out.aadt_mdv == pytest.approx(out.aadt_hdv, rel=1e-9)  # 1:1 ratio kept
        assert result.stats.rescaled == 1

    def test_functional_class_7_passes_through_untouched(self, small_corpus):
        links, _, _ = small_corpus
        fc7 = make_link("seven", fc=7, total=50.0)
        result = run_imputation(links[:50] + [fc7], FAST, FAST, seed=0)
        out = result.links[-1]
        assert out.aadt_mdv is None and out.aadt_hdv is None
        assert out.aadt_ldv is None
        assert result.stats.passthrough_unmodeled == 1

    def test_no_observed_target_raises(self):
        links = [make_link(f"l{i}") for i in range(5)]
        with pytest.raises(ValueError):
            run_imputation(links, FAST, FAST, seed=0)

    def test_deterministic_for_fixed_seed(self, mixed_corpus):
        links, _, _ = mixed_corpus
        sub = links[:300]
        r1 = run_imputation(sub, FAST, FAST, seed=9)
        r2 = run_imputation(sub, FAST, FAST, seed=9)
        assert [(l.aadt_mdv, l.aadt_hdv, l.aadt_ldv) for l in r1.links] \
            == [(l.aadt_mdv, l.aadt_hdv, l.aadt_ldv) for l in r2.links]


def test_imputed_csv_roundtrip(tmp_path, mixed_corpus):
    links, _, _ = mixed_corpus
    result = run_imputation(links[:200], FAST, FAST, seed=4)
    path = tmp_path / "imputed.csv"
    write_imputed_csv(result, path)
    back = read_imputed_csv(path)
    by_id = {l.link_id: l for l in result.links}
    assert len(back) == len(result.links)
    for link in back:
        orig = by_id[link.link_id]
        assert link.aadt_mdv == orig.aadt_mdv
        assert link.aadt_hdv == orig.aadt_hdv
        assert link.aadt_ldv == orig.aadt_ldv
        assert link.mdv_provenance == orig.mdv_provenance
        assert link.rescaled == orig.rescaled
    ids = [l.link_id for l in back]
    assert ids == sorted(ids)  # file is link_id-sorted
