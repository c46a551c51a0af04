"""Tests for ensemble simulation, empirical distributions, total-variation
distance, occupation measures, growth statistics and the CSV writers."""

import io
import math

import numpy as np
import pytest

from allelic_bdi import (
    AllelicPartition,
    DomainError,
    EmpiricalDistribution,
    ModelParams,
    RunawayError,
    TruncatedDistribution,
    default_checkpoints,
    growth_report,
    nbin_time_param,
    neg_bin_pmf,
    partition_stationary_truncated,
    run_ensemble,
    stationary_occupation,
    tv_distance,
    write_growth_csv,
    write_histogram_csv,
)
from allelic_bdi import __version__


def decode(text):
    return AllelicPartition.decode(text)


# ---------------------------------------------------------------------------
# empirical distributions
# ---------------------------------------------------------------------------


class TestEmpiricalDistribution:
    def test_moments(self):
        dist = EmpiricalDistribution({0: 1.0, 2: 3.0}, 4.0)
        assert dist.mean() == pytest.approx(1.5)
        assert dist.variance() == pytest.approx(0.75)
        assert dist.probabilities() == {0: pytest.approx(0.25), 2: pytest.approx(0.75)}

    def test_validation(self):
        with pytest.raises(DomainError):
            EmpiricalDistribution({0: 1.0}, 0.0)
        with pytest.raises(DomainError):
            EmpiricalDistribution({0: -1.0, 1: 5.0}, 4.0)
        with pytest.raises(DomainError):
            EmpiricalDistribution({0: 1.0, 1: 1.0}, 4.0)

    def test_marginals(self):
        dist = EmpiricalDistribution(
            {decode("1^2"): 2.0, decode("2^1"): 1.0, decode("1^1"): 1.0},
            4.0,
            replicates=4,
            seed=99,
        )
        sizes = dist.size_marginal()
        assert sizes.weights == {2: 3.0, 1: 1.0}
        assert sizes.total == 4.0
        assert sizes.replicates == 4 and sizes.seed == 99
        groups = dist.group_marginal()
        assert groups.weights == {2: 2.0, 1: 2.0}
        joint = dist.joint_groups_size()
        assert joint.weights == {(2, 2): 2.0, (1, 2): 1.0, (1, 1): 1.0}

    def test_restrict(self):
        dist = EmpiricalDistribution({decode("1^2"): 2.0, decode("1^1"): 2.0}, 4.0)
        small = dist.restrict(lambda m: m.size == 2)
        assert small == {decode("1^2"): pytest.approx(0.5)}


# ---------------------------------------------------------------------------
# total variation distance
# ---------------------------------------------------------------------------


class TestTvDistance:
    def test_basic_values(self):
        assert tv_distance({0: 1.0}, {0: 1.0}) == 0.0
        assert tv_distance({0: 1.0}, {1: 1.0}) == pytest.approx(1.0)
        assert tv_distance({0: 0.5, 1: 0.5}, {0: 1.0}) == pytest.approx(0.5)

    def test_symmetry(self):
        p = {0: 0.2, 1: 0.8}
        q = {0: 0.7, 2: 0.3}
        assert tv_distance(p, q) == pytest.approx(tv_distance(q, p))
        assert tv_distance(p, q) == pytest.approx(0.5 * (0.5 + 0.8 + 0.3))

    def test_tail_mass_counts_as_half(self):
        # both laws keep half their mass outside the stored support
        assert tv_distance({0: 0.5}, {0: 0.5}) == pytest.approx(0.5)
        # an exact truncation of the other law: the tail is the whole gap
        assert tv_distance({0: 0.5, 1: 0.25}, {0: 0.5, 1: 0.25, 2: 0.25}) == pytest.approx(0.25)

    def test_accepts_all_distribution_types(self):
        emp = EmpiricalDistribution({0: 3.0, 1: 1.0}, 4.0)
        trunc = TruncatedDistribution(2, {0: 0.75, 1: 0.25})
        assert tv_distance(emp, trunc) == pytest.approx(0.0, abs=1e-15)
        assert tv_distance(emp, {0: 0.75, 1: 0.25}) == pytest.approx(0.0, abs=1e-15)

    def test_validation(self):
        with pytest.raises(DomainError):
            tv_distance({0: 1.5}, {0: 1.0})
        with pytest.raises(DomainError):
            tv_distance({0: 1.0}, {0: 0.9, 1: -0.001})
        with pytest.raises(DomainError):
            tv_distance([0.5, 0.5], {0: 1.0})


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


class TestRunEnsemble:
    def test_deterministic(self):
        params = ModelParams(0.5, 1.0, 2.0)
        a = run_ensemble(params, 2.0, 64, 11)
        b = run_ensemble(params, 2.0, 64, 11)
        assert a.weights == b.weights
        assert a.total == 64.0
        assert a.replicates == 64
        assert a.seed == 11
        c = run_ensemble(params, 2.0, 64, 12)
        assert a.weights != c.weights

    def test_partition_keys_and_counts(self):
        dist = run_ensemble(ModelParams(0.5, 1.0, 2.0), 1.0, 50, 7)
        assert all(isinstance(k, AllelicPartition) for k in dist.weights)
        assert all(float(w).is_integer() and w > 0 for w in dist.weights.values())
        assert sum(dist.weights.values()) == 50.0

    def test_bdi_engine_uses_integer_keys(self):
        dist = run_ensemble(ModelParams(0.5, 1.0, 2.0), 1.0, 50, 7, engine="bdi")
        assert all(isinstance(k, int) for k in dist.weights)

    def test_branching_engine(self):
        dist = run_ensemble(ModelParams(0.5, 1.0, 2.0), 1.0, 50, 7, engine="branching")
        assert all(isinstance(k, AllelicPartition) for k in dist.weights)

    @pytest.mark.parametrize("engine", ["multiplicity", "branching"])
    def test_worker_count_does_not_change_results(self, engine):
        params = ModelParams(0.5, 1.0, 2.0)
        serial = run_ensemble(params, 1.5, 256, 31, engine)
        parallel = run_ensemble(params, 1.5, 256, 31, engine, workers=2)
        assert serial.weights == parallel.weights

    def test_validation(self):
        params = ModelParams(0.5, 1.0, 2.0)
        with pytest.raises(DomainError):
            run_ensemble(params, 1.0, 0, 1)
        with pytest.raises(DomainError):
            run_ensemble(params, 1.0, 10, 1, engine="urn")
        with pytest.raises(DomainError):
            run_ensemble(params, 1.0, 10, -1)

    def test_event_cap_propagates(self):
        with pytest.raises(RunawayError):
            run_ensemble(ModelParams(0.5, 5.0, 0.0), 100.0, 4, 1, max_events=50)

    def test_error_shrinks_with_replicates(self):
        # TV against the exact transient size law should fall roughly as
        # 1/sqrt(R); a 16x replicate ratio gives a factor of about 4
        params = ModelParams(0.5, 1.0, 2.0)
        b = nbin_time_param(params.mu, 3.0)
        target = {n: neg_bin_pmf(n, params.theta, b) for n in range(200)}
        small = run_ensemble(params, 3.0, 1000, 5, engine="bdi")
        big = run_ensemble(params, 3.0, 16000, 5, engine="bdi")
        tv_small = tv_distance(small, target)
        tv_big = tv_distance(big, target)
        assert tv_big < 0.01
        assert tv_small > tv_big
        assert tv_small / tv_big > 2.0


# ---------------------------------------------------------------------------
# occupation measure of one long run
# ---------------------------------------------------------------------------


class TestStationaryOccupation:
    def test_total_weight_and_determinism(self):
        params = ModelParams(0.5, 1.0, 2.0)
        occ = stationary_occupation(params, 200.0, 10.0, 8)
        assert occ.total == pytest.approx(190.0)
        assert sum(occ.weights.values()) == pytest.approx(190.0)
        assert all(isinstance(k, AllelicPartition) for k in occ.weights)
        again = stationary_occupation(params, 200.0, 10.0, 8)
        assert occ.weights == again.weights

    def test_approaches_stationary_law(self):
        params = ModelParams(0.5, 1.0, 2.0)
        occ = stationary_occupation(params, 3000.0, 100.0, 4242)
        probs = occ.probabilities()
        # pi(empty) = (1 - 1/mu)^theta = 0.5
        assert abs(probs[AllelicPartition.empty()] - 0.5) < 0.07
        table = partition_stationary_truncated(params, 6)
        assert tv_distance(occ, table) < 0.15

    def test_validation(self):
        good = ModelParams(0.5, 1.0, 2.0)
        with pytest.raises(DomainError):
            stationary_occupation(ModelParams(0.5, 1.0, 1.0), 100.0, 10.0, 1)
        with pytest.raises(DomainError):
            stationary_occupation(good, 100.0, 100.0, 1)
        with pytest.raises(DomainError):
            stationary_occupation(good, 100.0, -1.0, 1)


# ---------------------------------------------------------------------------
# group-count growth statistics
# ---------------------------------------------------------------------------


def _rows_equal(a, b):
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        for fa, fb in zip(
            (ra.n, ra.mean_groups, ra.sd_groups, ra.log_norm_mean, ra.log_norm_cv,
             ra.pow_norm_mean, ra.pow_norm_cv),
            (rb.n, rb.mean_groups, rb.sd_groups, rb.log_norm_mean, rb.log_norm_cv,
             rb.pow_norm_mean, rb.pow_norm_cv),
        ):
            if fa != fb and not (math.isnan(fa) and math.isnan(fb)):
                return False
    return True


class TestGrowthReport:
    def test_rows_follow_checkpoints(self):
        params = ModelParams(0.5, 1.0)
        rows = growth_report(params, 1000, 4, seed=3)
        assert [row.n for row in rows] == list(default_checkpoints(1000))
        first, last = rows[0], rows[-1]
        assert first.n == 1 and last.n == 1000
        assert first.mean_groups == 1.0 and first.sd_groups == 0.0
        assert math.isnan(first.log_norm_mean) and math.isnan(first.log_norm_cv)
        assert first.pow_norm_mean == 1.0
        assert last.mean_groups > first.mean_groups

    def test_power_defaults_to_alpha(self):
        params = ModelParams(0.5, 1.0)
        rows = growth_report(params, 100, 4, seed=3)
        explicit = growth_report(params, 100, 4, seed=3, power=0.5)
        assert _rows_equal(rows, explicit)
        other = growth_report(params, 100, 4, seed=3, power=0.25)
        assert other[-1].mean_groups == rows[-1].mean_groups
        assert other[-1].pow_norm_mean == pytest.approx(
            other[-1].mean_groups / 100**0.25, rel=1e-12
        )
        assert other[-1].pow_norm_mean != rows[-1].pow_norm_mean

    def test_alpha_zero_power_is_identity(self):
        rows = growth_report(ModelParams(0.0, 2.0), 100, 4, seed=9)
        assert rows[-1].pow_norm_mean == pytest.approx(rows[-1].mean_groups, rel=1e-12)

    def test_deterministic(self):
        params = ModelParams(0.5, 1.0)
        assert _rows_equal(
            growth_report(params, 100, 5, seed=21), growth_report(params, 100, 5, seed=21)
        )
        assert not _rows_equal(
            growth_report(params, 100, 5, seed=21), growth_report(params, 100, 5, seed=22)
        )

    def test_validation(self):
        with pytest.raises(DomainError):
            growth_report(ModelParams(0.5, 1.0), 100, 1, seed=3)


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------


def _split_csv(text):
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            header[key] = value
        else:
            body.append(line)
    return header, body


class TestWriteHistogramCsv:
    def test_ensemble_histogram(self):
        dist = run_ensemble(ModelParams(0.5, 1.0, 2.0), 1.0, 40, 13)
        buf = io.StringIO()
        write_histogram_csv(dist, buf, metadata={"engine": "multiplicity"})
        header, body = _split_csv(buf.getvalue())
        assert header["artifact"] == "allelic-bdi"
        assert header["version"] == __version__
        assert header["total_weight"] == "40.0"
        assert header["replicates"] == "40"
        assert header["seed"] == "13"
        assert header["engine"] == "multiplicity"
        assert body[0] == "key,count,probability"
        assert len(body) == 1 + len(dist.weights)
        total = 0
        for line in body[1:]:
            key, count, prob = line.split(",")
            m = decode(key)
            assert int(count) == dist.weights[m]
            assert float(prob) == dist.weights[m] / 40.0  # repr round-trips
            total += int(count)
        assert total == 40
        # keys are sorted by (size, text)
        keys = [decode(line.split(",")[0]) for line in body[1:]]
        assert keys == sorted(keys, key=lambda m: (m.size, m.encode()))

    def test_integer_keys_and_fractional_weights(self):
        occ = EmpiricalDistribution({0: 1.25, 3: 2.75}, 4.0)
        buf = io.StringIO()
        write_histogram_csv(occ, buf)
        header, body = _split_csv(buf.getvalue())
        assert "replicates" not in header
        assert body[1] == f"0,1.25,{1.25 / 4.0!r}"
        assert body[2] == f"3,2.75,{2.75 / 4.0!r}"

    def test_unsupported_key_type(self):
        dist = EmpiricalDistribution({"oops": 1.0}, 1.0)
        with pytest.raises(DomainError):
            write_histogram_csv(dist, io.StringIO())

    def test_writes_to_path(self, tmp_path):
        dist = EmpiricalDistribution({1: 2.0, 2: 2.0}, 4.0)
        target = tmp_path / "hist.csv"
        write_histogram_csv(dist, str(target))
        assert target.read_text().count("\n") >= 4


class TestWriteGrowthCsv:
    def test_round_trip(self):
        rows = growth_report(ModelParams(0.5, 1.0), 100, 4, seed=3)
        buf = io.StringIO()
        write_growth_csv(rows, buf, metadata={"runs": 4})
        header, body = _split_csv(buf.getvalue())
        assert header["artifact"] == "allelic-bdi"
        assert header["runs"] == "4"
        assert body[0] == (
            "n,mean_groups,sd_groups,log_norm_mean,log_norm_cv,pow_norm_mean,pow_norm_cv"
        )
        assert len(body) == 1 + len(rows)
        for line, row in zip(body[1:], rows):
            fields = line.split(",")
            assert int(fields[0]) == row.n
            assert float(fields[1]) == row.mean_groups
            parsed = float(fields[3])
            assert parsed == row.log_norm_mean or (
                math.isnan(parsed) and math.isnan(row.log_norm_mean)
            )
            assert float(fields[5]) == row.pow_norm_mean

    def test_writes_to_path(self, tmp_path):
        rows = growth_report(ModelParams(0.5, 1.0), 100, 4, seed=3)
        target = tmp_path / "growth.csv"
        write_growth_csv(rows, str(target))
        text = target.read_text()
        assert "n,mean_groups" in text
