from __future__ import annotations

from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_router import core
from bandit_router.errors import (
    ConfigError,
    DataError,
    FormatError,
    InputError,
    InvalidRosterError,
)

from conftest import make_dataset


class TestNormalizeCosts:
    def test_four_arm_roster(self):
        assert core.normalize_costs(["0.0004", "0.0005", "0.0020", "0.0200"]) == [
            0.02,
            0.025,
            0.1,
            1.0,
        ]

    def test_heterogeneous_roster(self):
        assert core.normalize_costs(["0.00015", "0.00030", "0.00075", "0.00080"]) == [
            0.1875,
            0.375,
            0.9375,
            1.0,
        ]

    def test_single_arm(self):
        assert core.normalize_costs([5.0]) == [1.0]

    def test_empty_roster_rejected(self):
        with pytest.raises(InvalidRosterError):
            core.normalize_costs([])

    def test_all_zero_rejected(self):
        with pytest.raises(InvalidRosterError):
            core.normalize_costs(["0", "0.00"])

    def test_negative_price_rejected(self):
        with pytest.raises(InvalidRosterError):
            core.normalize_costs(["0.01", "-0.5"])

    def test_max_ties_all_map_to_one(self):
        assert core.normalize_costs(["2", "2", "1"]) == [1.0, 1.0, 0.5]

    @given(
        prices=st.lists(
            st.decimals(min_value="0.0001", max_value="1000", places=4), min_size=1, max_size=8
        ),
        scale=st.decimals(min_value="0.01", max_value="100", places=2),
    )
    def test_scale_invariance(self, prices, scale):
        scaled = [p * scale for p in prices]
        assert core.normalize_costs(scaled) == core.normalize_costs(prices)

    @given(
        prices=st.lists(
            st.decimals(min_value="0.0001", max_value="1000", places=4), min_size=1, max_size=8
        )
    )
    def test_max_is_exactly_one(self, prices):
        norm = core.normalize_costs(prices)
        assert max(norm) == 1.0
        assert all(0 < v <= 1.0 for v in norm)


class TestComputeReward:
    def test_expensive_correct(self):
        assert core.compute_reward(1, 1.0, core.RewardConfig(p=0.001)) == 0.999

    def test_p_zero_collapses_to_correctness(self):
        assert core.compute_reward(0, 0.5, core.RewardConfig(p=0)) == 0

    def test_cheap_correct(self):
        assert core.compute_reward(1, 0.1, core.RewardConfig(p=0.03)) == 0.997

    def test_negative_p_rejected(self):
        with pytest.raises(ConfigError):
            core.RewardConfig(p=-0.1)

    def test_bad_cost_mode_rejected(self):
        with pytest.raises(ConfigError):
            core.RewardConfig(cost_mode="elastic")

    def test_bad_inputs_rejected(self):
        with pytest.raises(InputError):
            core.compute_reward(2, 0.5, core.RewardConfig())
        with pytest.raises(InputError):
            core.compute_reward(1, 1.5, core.RewardConfig())

    @given(
        correct=st.integers(0, 1),
        cost=st.floats(0.0, 1.0, allow_nan=False),
        p=st.floats(0.0, 10.0, allow_nan=False),
    )
    def test_reward_bounds(self, correct, cost, p):
        r = core.compute_reward(correct, cost, core.RewardConfig(p=p))
        assert -p <= r <= 1.0

    @given(
        correct=st.integers(0, 1),
        cost=st.floats(0.0, 1.0, allow_nan=False),
        p1=st.floats(0.0, 5.0, allow_nan=False),
        p2=st.floats(0.0, 5.0, allow_nan=False),
    )
    def test_monotone_in_p(self, correct, cost, p1, p2):
        lo, hi = sorted([p1, p2])
        r_lo = core.compute_reward(correct, cost, core.RewardConfig(p=lo))
        r_hi = core.compute_reward(correct, cost, core.RewardConfig(p=hi))
        assert r_hi <= r_lo
        if cost == 0.0:
            assert r_hi == r_lo == correct


class TestTokenCost:
    def test_davinci_call(self):
        assert core.token_cost(Decimal("0.0200"), 50) == Decimal("0.001")

    def test_titan_call(self):
        assert core.token_cost("0.00015", 1000) == Decimal("0.00015")

    def test_zero_tokens(self):
        assert core.token_cost("123.45", 0) == 0

    def test_negative_tokens_rejected(self):
        with pytest.raises(InputError):
            core.token_cost("0.01", -1)


class TestTieBreakHelper:
    def test_unique_argmax(self):
        assert core.argmax_preferring_cheap([0.5, 0.9, 0.1], [1.0, 1.0, 1.0]) == 1

    def test_tie_goes_to_cheaper(self):
        assert core.argmax_preferring_cheap([0.7, 0.7], [1.0, 0.5]) == 1

    def test_tie_on_cost_goes_to_lower_index(self):
        assert core.argmax_preferring_cheap([0.7, 0.7], [0.5, 0.5]) == 0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            core.argmax_preferring_cheap([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            core.argmax_preferring_cheap([1.0], [0.5, 0.5])

    @given(
        q=st.lists(st.integers(-64, 64), min_size=1, max_size=6),
        shift=st.integers(-64, 64),
    )
    def test_invariant_under_constant_shift(self, q, shift):
        # 1/32-grid values keep float addition exact, so ties survive the shift
        qs = [v / 32 for v in q]
        costs = [((i * 7) % 5 + 1) / 8 for i in range(len(q))]
        shifted = [v + shift / 32 for v in qs]
        assert core.argmax_preferring_cheap(qs, costs) == core.argmax_preferring_cheap(
            shifted, costs
        )


class TestDatasetRoundTrip:
    def _dataset(self):
        return make_dataset(
            correctness=[(1, 0), (1, 1), (0, 1)],
            prices=["0.0004", "0.0200"],
            embeddings=[[1.5, -2.25], [0.0, 1.0], [3.125, 0.5]],
            tokens=[(50, 50), (100, 80), (30, 60)],
        )

    def test_inline_round_trip(self, tmp_path):
        ds = self._dataset()
        core.save_dataset(ds, tmp_path / "d.ds")
        assert core.datasets_equal(core.load_dataset(tmp_path / "d.ds"), ds)

    def test_sidecar_round_trip(self, tmp_path):
        ds = self._dataset()
        core.save_dataset(ds, tmp_path / "d.ds", sidecar=True)
        assert (tmp_path / "d.ds.emb").exists()
        assert core.datasets_equal(core.load_dataset(tmp_path / "d.ds"), ds)

    def test_prices_survive_as_decimal_strings(self, tmp_path):
        ds = self._dataset()
        core.save_dataset(ds, tmp_path / "d.ds")
        text = (tmp_path / "d.ds").read_text()
        assert '"0.0004"' in text and '"0.0200"' in text
        loaded = core.load_dataset(tmp_path / "d.ds")
        assert loaded.arms[0].price_per_1k_tokens == Decimal("0.0004")
        assert loaded.arms[1].price_per_1k_tokens == Decimal("0.0200")

    def test_save_is_deterministic(self, tmp_path):
        ds = self._dataset()
        core.save_dataset(ds, tmp_path / "a.ds")
        core.save_dataset(ds, tmp_path / "b.ds")
        assert (tmp_path / "a.ds").read_bytes() == (tmp_path / "b.ds").read_bytes()

    def test_empty_records_is_valid(self, tmp_path):
        arms = core.build_roster([("a", "0.1"), ("b", "0.2")])
        ds = core.RoutingDataset(arms=arms, records=[], embedding_dim=4)
        core.save_dataset(ds, tmp_path / "empty.ds")
        loaded = core.load_dataset(tmp_path / "empty.ds")
        assert loaded.records == [] and loaded.embedding_dim == 4

    @given(
        n=st.integers(0, 5),
        dim=st.integers(1, 6),
        sidecar=st.booleans(),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=25, deadline=None)
    def test_round_trip_is_identity(self, tmp_path_factory, n, dim, sidecar, seed):
        rng = np.random.default_rng(seed)
        arms = core.build_roster([("x", "0.001"), ("y", "0.5")])
        records = [
            core.QueryRecord(
                query_id=f"r{i}",
                embedding=rng.normal(size=dim).astype(np.float32),
                correctness=tuple(int(b) for b in rng.integers(0, 2, 2)),
                token_counts=tuple(int(t) for t in rng.integers(0, 500, 2)),
                text=None if i % 2 else f"text {i}",
            )
            for i in range(n)
        ]
        ds = core.RoutingDataset(arms=arms, records=records, embedding_dim=dim)
        path = tmp_path_factory.mktemp("rt") / "d.ds"
        core.save_dataset(ds, path, sidecar=sidecar)
        assert core.datasets_equal(core.load_dataset(path), ds)


class TestDatasetValidation:
    def test_embedding_dim_mismatch_names_record(self):
        with pytest.raises(DataError, match="q1"):
            make_dataset(
                correctness=[(1, 0), (0, 1)],
                prices=["0.1", "0.2"],
                embeddings=[[1.0, 2.0], [1.0, 2.0, 3.0]],
            )

    def test_duplicate_query_id_rejected(self):
        arms = core.build_roster([("a", "0.1")])
        rec = lambda qid: core.QueryRecord(
            qid, np.zeros(2, dtype=np.float32), (1,), (10,)
        )
        with pytest.raises(DataError, match="duplicate"):
            core.RoutingDataset(arms=arms, records=[rec("q"), rec("q")], embedding_dim=2)

    def test_correctness_length_checked(self):
        with pytest.raises(DataError, match="correctness length"):
            make_dataset(correctness=[(1, 0, 1)], prices=["0.1", "0.2"])

    def test_correctness_bits_checked(self):
        with pytest.raises(DataError, match="0 or 1"):
            make_dataset(correctness=[(1, 2)], prices=["0.1", "0.2"])

    def test_negative_tokens_checked(self):
        with pytest.raises(DataError, match="token counts"):
            make_dataset(
                correctness=[(1, 0)], prices=["0.1", "0.2"], tokens=[(10, -1)]
            )

    def test_load_rejects_garbage(self, tmp_path):
        bad = tmp_path / "bad.ds"
        bad.write_text('{"format":"routing-dataset","version":1,"embedding_dim')
        with pytest.raises(FormatError):
            core.load_dataset(bad)

    def test_load_rejects_wrong_format(self, tmp_path):
        other = tmp_path / "other.ds"
        other.write_text('{"format":"something-else","version":1}\n')
        with pytest.raises(FormatError):
            core.load_dataset(other)

    def test_load_names_offending_record(self, tmp_path, tiny_dataset):
        path = tmp_path / "broken.ds"
        core.save_dataset(tiny_dataset, path)
        lines = path.read_text().splitlines()
        lines[2] = lines[2].replace('"embedding":[0.0,1.0]', '"embedding":[0.0,1.0,2.0]')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="q2"):
            core.load_dataset(path)


class TestRoster:
    def test_exactly_one_arm_at_max_cost(self):
        arms = core.build_roster(
            [("a", "0.0004"), ("b", "0.0005"), ("c", "0.0020"), ("d", "0.0200")]
        )
        assert [a.normalized_cost for a in arms].count(1.0) == 1
        assert arms[3].normalized_cost == 1.0

    def test_fingerprint_depends_on_names_and_prices(self):
        base = core.build_roster([("a", "0.1"), ("b", "0.2")])
        renamed = core.build_roster([("a", "0.1"), ("c", "0.2")])
        repriced = core.build_roster([("a", "0.1"), ("b", "0.3")])
        assert core.roster_fingerprint(base) != core.roster_fingerprint(renamed)
        assert core.roster_fingerprint(base) != core.roster_fingerprint(repriced)
        assert core.roster_fingerprint(base) == core.roster_fingerprint(
            core.build_roster([("a", "0.1"), ("b", "0.2")])
        )
