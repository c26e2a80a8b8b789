import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from swapmix.domain import FeatureMatrix
from swapmix.errors import DimensionMismatch, IndexOutOfRange
from swapmix.perturb import apply_swap
from swapmix.swapplan import SwapCandidate, SwapPlan


class TestApplySwap:
    def test_equals_direct_replacement(self):
        rng = np.random.default_rng(0)
        V = FeatureMatrix(rng.standard_normal((4, 6)).astype(np.float32))
        donor = rng.standard_normal(6).astype(np.float32)
        got = apply_swap(V, 2, donor)
        assert got == FeatureMatrix(oracles.replace_row(V.rows, 2, donor))

    def test_other_rows_bitwise_untouched(self):
        rng = np.random.default_rng(1)
        V = FeatureMatrix(rng.standard_normal((5, 3)).astype(np.float32))
        got = apply_swap(V, 0, rng.standard_normal(3).astype(np.float32))
        assert np.array_equal(
            got.rows[1:].view(np.uint32), V.rows[1:].view(np.uint32)
        )

    def test_source_matrix_unmodified(self):
        rng = np.random.default_rng(2)
        V = FeatureMatrix(rng.standard_normal((3, 3)).astype(np.float32))
        before = V.rows.copy()
        apply_swap(V, 1, rng.standard_normal(3).astype(np.float32))
        assert np.array_equal(V.rows, before)

    def test_index_out_of_range(self):
        V = FeatureMatrix([[1.0, 2.0]])
        with pytest.raises(IndexOutOfRange):
            apply_swap(V, 1, np.array([0.0, 0.0], dtype=np.float32))
        with pytest.raises(IndexOutOfRange):
            apply_swap(V, -1, np.array([0.0, 0.0], dtype=np.float32))

    def test_dimension_mismatch(self):
        V = FeatureMatrix([[1.0, 2.0]])
        with pytest.raises(DimensionMismatch):
            apply_swap(V, 0, np.array([1.0, 2.0, 3.0], dtype=np.float32))

    # multiplying by a zero mask flips the sign bit of -0.0, so the
    # bitwise-equality guarantee is stated for non-(-0.0) payloads
    finite = st.floats(
        min_value=-1e6, max_value=1e6, allow_nan=False, width=32
    ).filter(lambda x: not (x == 0 and np.signbit(np.float32(x))))

    @settings(max_examples=100, deadline=None)
    @given(
        data=st.data(),
        n=st.integers(min_value=1, max_value=6),
        d=st.integers(min_value=1, max_value=8),
    )
    def test_property_matches_direct_replacement(self, data, n, d):
        rows = data.draw(arrays(np.float32, (n, d), elements=self.finite))
        donor = data.draw(arrays(np.float32, (d,), elements=self.finite))
        j = data.draw(st.integers(min_value=0, max_value=n - 1))
        got = apply_swap(FeatureMatrix(rows), j, donor)
        assert got == FeatureMatrix(oracles.replace_row(rows, j, donor))


def candidate(j, kind="class"):
    return SwapCandidate(
        kind=kind,
        source_detection_index=j,
        donor_image="imgZ",
        donor_object="z1",
        donor_class="truck",
        donor_attributes=frozenset({"blue"}),
    )


class TestEnumerate:
    def test_skips_keep_pert_ids_dense_and_logged(self):
        from swapmix.perturb import enumerate_perturbations

        V = FeatureMatrix(np.ones((3, 2), dtype=np.float32))
        plan = SwapPlan(
            question_id="q1",
            per_object=((0, (candidate(0), candidate(0, "attribute"))), (2, (candidate(2),))),
            k=1,
            seed=0,
        )
        donor = np.full(2, 7.0, dtype=np.float32)

        def resolve(cand):
            if cand.source_detection_index == 2:
                return None, "donor unmatched"
            return donor, None

        results = list(enumerate_perturbations(V, plan, resolve))
        assert [r.pert_id for r, _ in results] == [1, 2, 3]
        assert results[0][1].rows[0][0] == 7.0
        assert results[2][0].skip_reason == "donor unmatched"
        assert results[2][1] is None
