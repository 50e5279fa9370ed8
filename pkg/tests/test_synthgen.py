import numpy as np
import pytest

from obsmatch.corpus import ingest_events
from obsmatch.diagnostics import standardized_mean_difference
from obsmatch.matcher import MatchedPair, MatchSet
from obsmatch.synthgen import (
    IntensityPlan,
    MediationPlan,
    SynthConfig,
    SynthError,
    export_events,
    generate_study,
    oracle_true_effect,
    sample_documents,
)


class TestGenerate:
    def test_unconfounded_naive_recovers_effect(self):
        cfg = SynthConfig(
            n_units=20_000, n_covariates=2,
            treatment_weights=(0.0, 0.0), outcome_weights=(0.0, 0.0),
            true_effect=5.0, outcome_noise_sd=1.0, seed=1,
        )
        study = generate_study(cfg)
        assert study.naive_difference() == pytest.approx(5.0, abs=0.1)

    def test_confounded_naive_biased_with_zero_effect(self):
        cfg = SynthConfig(
            n_units=20_000, n_covariates=1,
            treatment_weights=(1.0,), outcome_weights=(1.0,),
            true_effect=0.0, outcome_noise_sd=1.0, seed=2,
        )
        study = generate_study(cfg)
        assert abs(study.naive_difference()) > 0.5
        # yet the stored counterfactual effect is exactly zero per unit
        assert np.array_equal(study.y_treated, study.y_control)

    def test_same_seed_bitwise_identical(self):
        cfg = SynthConfig(n_units=500, n_covariates=3,
                          treatment_weights=(1.0, 0.5, 0.0),
                          outcome_weights=(1.0, 0.0, 0.5),
                          true_effect=2.0, seed=7)
        a = generate_study(cfg)
        b = generate_study(cfg)
        assert np.array_equal(a.covariates, b.covariates)
        assert np.array_equal(a.treatment, b.treatment)
        assert np.array_equal(a.outcome, b.outcome)

    def test_outcome_equals_selected_counterfactual(self):
        cfg = SynthConfig(n_units=300, n_covariates=2,
                          treatment_weights=(0.8, 0.2),
                          outcome_weights=(0.5, 0.5),
                          true_effect=3.0, seed=3,
                          mediation=MediationPlan(a=1.0, b=0.5))
        study = generate_study(cfg)
        expected = np.where(study.treatment == 1, study.y_treated, study.y_control)
        assert np.array_equal(study.outcome, expected)

    def test_config_validation(self):
        with pytest.raises(SynthError):
            SynthConfig(n_units=5)
        with pytest.raises(SynthError):
            SynthConfig(n_units=100, n_covariates=2, treatment_weights=(1.0,),
                        outcome_weights=(1.0, 1.0))

    def test_intensity_gap_design(self):
        cfg = SynthConfig(
            n_units=400, n_covariates=1, treatment_weights=(0.5,),
            outcome_weights=(0.5,), true_effect=1.0, seed=5,
            intensity=IntensityPlan(offset=10, extra_mean=5.0),
        )
        study = generate_study(cfg)
        assert study.intensity is not None
        treated = study.intensity[study.treatment == 1]
        controls = study.intensity[study.treatment == 0]
        assert (treated >= 10).all()
        assert (controls == 0).all()
        # every cutoff in the gap dichotomizes identically
        for cutoff in range(1, 11):
            assert np.array_equal(study.intensity >= cutoff, study.treatment == 1)


class TestCovariateBalanceProperties:
    def test_unconfounded_smds_vanish(self):
        cfg = SynthConfig(
            n_units=10_000, n_covariates=3,
            treatment_weights=(0.0, 0.0, 0.0), outcome_weights=(1.0, 1.0, 1.0),
            true_effect=0.0, seed=11,
        )
        study = generate_study(cfg)
        for j in range(3):
            smd = standardized_mean_difference(
                study.covariates[study.treatment == 1, j],
                study.covariates[study.treatment == 0, j],
            )
            assert abs(smd) < 0.1

    def test_confounded_smd_planted(self):
        cfg = SynthConfig(
            n_units=10_000, n_covariates=1, treatment_weights=(1.0,),
            outcome_weights=(1.0,), true_effect=0.0, seed=12,
        )
        study = generate_study(cfg)
        smd = standardized_mean_difference(
            study.covariates[study.treatment == 1, 0],
            study.covariates[study.treatment == 0, 0],
        )
        assert abs(smd) > 0.3


class TestOracle:
    def _match_all_treated(self, study):
        controls = study.control_ids()
        return MatchSet(
            caliper=0.0,
            pairs=[MatchedPair(t, controls[0], 1.0) for t in study.treated_ids()],
            unmatched_treated=[],
        )

    def test_constant_effect(self):
        cfg = SynthConfig(n_units=200, n_covariates=1, treatment_weights=(1.0,),
                          outcome_weights=(1.0,), true_effect=4.0, seed=4)
        study = generate_study(cfg)
        assert oracle_true_effect(study) == pytest.approx(4.0, abs=1e-12)
        assert oracle_true_effect(study, self._match_all_treated(study)) == \
            pytest.approx(4.0, abs=1e-12)

    def test_zero_effect(self):
        cfg = SynthConfig(n_units=200, n_covariates=1, treatment_weights=(1.0,),
                          outcome_weights=(1.0,), true_effect=0.0, seed=4)
        study = generate_study(cfg)
        assert oracle_true_effect(study) == 0.0

    def test_heterogeneous_effects_cross_checked(self):
        cfg = SynthConfig(n_units=500, n_covariates=1, treatment_weights=(0.5,),
                          outcome_weights=(0.5,), true_effect=2.0, effect_sd=1.0,
                          seed=9)
        study = generate_study(cfg)
        ms = self._match_all_treated(study)
        index = {uid: i for i, uid in enumerate(study.unit_ids)}
        direct = np.mean([
            study.effect_per_unit[index[p.treated_unit]] for p in ms.pairs
        ])
        assert oracle_true_effect(study, ms) == pytest.approx(direct, rel=1e-12)


class TestExport:
    def test_documents_encode_covariates(self):
        cfg = SynthConfig(n_units=50, n_covariates=2, treatment_weights=(1.0, 0.0),
                          outcome_weights=(1.0, 0.0), true_effect=1.0, seed=6)
        study = generate_study(cfg)
        texts, k = sample_documents(study, words_per_doc=40)
        assert len(texts) == 50
        assert k == 3
        # units with a large first covariate should use topic-0 words more
        hi = np.argmax(study.covariates[:, 0])
        lo = np.argmin(study.covariates[:, 0])
        hi_share = sum(w.startswith("aa") for w in texts[hi].split()) / 40
        lo_share = sum(w.startswith("aa") for w in texts[lo].split()) / 40
        assert hi_share > lo_share

    def test_export_round_trips_through_ingest(self, tmp_path):
        cfg = SynthConfig(n_units=30, n_covariates=2, treatment_weights=(1.0, 0.5),
                          outcome_weights=(1.0, 0.5), true_effect=5.0,
                          outcome_baseline=100.0, seed=8)
        study = generate_study(cfg)
        path = tmp_path / "events.jsonl"
        n_lines = export_events(study, path, cutoff=4)
        with open(path, encoding="utf-8") as fh:
            corpus = ingest_events(fh)
        assert len(corpus) == n_lines
        from obsmatch.corpus import build_cohort

        cohort = build_cohort(corpus, group="G2", cutoff=4)
        by_user = {u.user: u for u in cohort.units}
        for i, uid in enumerate(study.unit_ids):
            assert by_user[uid].treatment == study.treatment[i]
            assert by_user[uid].weight_loss_lb == pytest.approx(
                study.outcome[i], abs=0.005
            )
