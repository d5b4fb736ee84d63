import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecsp import retrieval
from ecsp.core import EmotionClass, Split
from ecsp.errors import (
    DimensionMismatch,
    EmptyAfterExclusion,
    EmptyPool,
    MissingLanguageIndex,
    UnlabeledPoolRecord,
    ZeroVector,
)
from ecsp.retrieval import build_index, cosine_similarity, retrieve

from .conftest import make_embedding, make_record, random_pool


def brute_force_neighbors(pool, query_emb, language, k, exclude_id=None):
    """Independent oracle: raw-vector cosine per entry, full Python sort.

    No pre-normalization and no numpy ordering helpers; ties resolve by
    ascending id like the production contract.
    """
    q = np.asarray(query_emb.joint, dtype=np.float64)
    qn = math.sqrt(float(np.dot(q, q)))
    scored = []
    for record, emb in pool:
        if record.language != language or record.id == exclude_id:
            continue
        v = np.asarray(emb.joint, dtype=np.float64)
        sim = float(np.dot(v, q)) / (math.sqrt(float(np.dot(v, v))) * qn)
        scored.append((record.id, min(1.0, max(-1.0, sim)), record.gold_emotion))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


class TestCosineSimilarity:
    def test_identical_direction(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_forty_five_degrees(self):
        # 1/sqrt(2), hand-computed
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            0.7071067811865475, abs=1e-15
        )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_clamped_to_unit_interval(self):
        v = [0.1] * 64
        assert cosine_similarity(v, v) <= 1.0


class TestBuildIndex:
    def test_partitions_by_language(self):
        rng = np.random.default_rng(0)
        pool = random_pool(rng, 5, 3, 2, languages=("english", "arabic"))
        # languages alternate: 3 english, 2 arabic
        index_map = build_index(pool)
        assert sorted(index_map) == ["arabic", "english"]
        assert index_map["english"].n == 3
        assert index_map["arabic"].n == 2

    def test_vectors_stored_unit_norm(self):
        record = make_record(id="v")
        emb = make_embedding("v", [3.0], [4.0])
        index = build_index([(record, emb)])["english"]
        assert index.matrix[0].tolist() == [0.6, 0.8]

    def test_non_train_pool_record_rejected(self):
        record = make_record(id="t", split=Split.TEST)
        emb = make_embedding("t", [1.0], [0.0])
        with pytest.raises(UnlabeledPoolRecord):
            build_index([(record, emb)])

    def test_unlabeled_pool_record_rejected(self):
        record = make_record(id="u", gold=None, split=Split.TRAIN)
        emb = make_embedding("u", [1.0], [0.0])
        with pytest.raises(UnlabeledPoolRecord):
            build_index([(record, emb)])

    def test_empty_pool_rejected(self):
        with pytest.raises(EmptyPool):
            build_index([])


class TestRetrieve:
    def setup_method(self):
        self.rng = np.random.default_rng(1234)
        self.pool = random_pool(self.rng, 30, 6, 4)
        self.index_map = build_index(self.pool)

    def test_identical_vector_gets_pseudo_label(self):
        record, emb = self.pool[0]
        query = make_embedding("query", emb.image_part, emb.text_part)
        outcome = retrieve(query, record.language, self.index_map, eta=0.75)
        assert outcome.neighbors[0].id == record.id
        assert outcome.neighbors[0].similarity == pytest.approx(1.0, abs=1e-12)
        assert outcome.pseudo_label is record.gold_emotion

    def test_orthogonal_query_gets_no_pseudo_label(self):
        # One-hot pool on distinct axes; query on a different axis.
        pool = []
        for i in range(3):
            vec = np.zeros(8)
            vec[i] = 1.0
            record = make_record(id=f"b{i}", gold=EmotionClass(i))
            pool.append((record, make_embedding(record.id, vec[:5], vec[5:])))
        index_map = build_index(pool)
        q = np.zeros(8)
        q[7] = 1.0
        outcome = retrieve(make_embedding("q", q[:5], q[5:]), "english", index_map, eta=0.75)
        assert outcome.neighbors[0].similarity == pytest.approx(0.0, abs=1e-12)
        assert outcome.pseudo_label is None

    def test_threshold_is_strict(self):
        # Pool vector with dyadic components squaring to exactly 1, so the
        # stored unit form is bit-exact and the similarity against
        # [1, 0, ...] computes to exactly eta.
        record = make_record(id="edge", gold=EmotionClass.FEAR)
        pool = [(record, make_embedding("edge", [0.75, 0.5], [0.25, 0.25, 0.25]))]
        index_map = build_index(pool)
        query = make_embedding("q", [1.0, 0.0], [0.0, 0.0, 0.0])
        outcome = retrieve(query, "english", index_map, eta=0.75)
        assert outcome.neighbors[0].similarity == 0.75
        assert outcome.pseudo_label is None

    def test_missing_language(self):
        query = make_embedding("q", [1.0] * 6, [1.0] * 4)
        with pytest.raises(MissingLanguageIndex):
            retrieve(query, "finnish", self.index_map)

    def test_exclusion_can_empty_the_index(self):
        record = make_record(id="only")
        emb = make_embedding("only", [1.0], [0.0])
        index_map = build_index([(record, emb)])
        with pytest.raises(EmptyAfterExclusion):
            retrieve(emb, "english", index_map, exclude_id="only")

    def test_matches_brute_force_oracle(self):
        for qi in range(40):
            vec = self.rng.normal(size=10)
            query = make_embedding(f"q{qi}", vec[:6], vec[6:])
            language = ("english", "arabic", "chinese")[qi % 3]
            for k in (1, 3):
                outcome = retrieve(query, language, self.index_map, k=k)
                expected = brute_force_neighbors(self.pool, query, language, k)
                assert [n.id for n in outcome.neighbors] == [e[0] for e in expected]
                for n, e in zip(outcome.neighbors, expected):
                    assert n.similarity == pytest.approx(e[1], abs=1e-12)

    def test_k3_splices_gated_labels_in_rank_order(self):
        # Three near-identical pool vectors with distinct labels.
        base = np.array([1.0, 0.5, -0.25, 2.0])
        pool = []
        for i, gold in enumerate([EmotionClass.AWE, EmotionClass.FEAR, EmotionClass.SADNESS]):
            vec = base + i * 1e-3
            record = make_record(id=f"n{i}", gold=gold)
            pool.append((record, make_embedding(record.id, vec[:2], vec[2:])))
        index_map = build_index(pool)
        query = make_embedding("q", base[:2], base[2:])
        outcome = retrieve(query, "english", index_map, k=3, eta=0.75)
        assert len(outcome.gated_labels) == 3
        assert outcome.pseudo_label_text == "awe, fear, sadness"
        assert outcome.pseudo_label is EmotionClass.AWE

    def test_k3_gates_each_neighbor_individually(self):
        # First neighbor above the gate, the other two far below it.
        pool = [
            (make_record(id="hit", gold=EmotionClass.ANGER), make_embedding("hit", [1.0, 0.0], [0.0])),
            (make_record(id="m1", gold=EmotionClass.AWE), make_embedding("m1", [0.0, 1.0], [0.0])),
            (make_record(id="m2", gold=EmotionClass.FEAR), make_embedding("m2", [0.0, 0.0], [1.0])),
        ]
        index_map = build_index(pool)
        query = make_embedding("q", [1.0, 0.0], [0.0])
        outcome = retrieve(query, "english", index_map, k=3, eta=0.75)
        assert len(outcome.neighbors) == 3
        assert outcome.gated_labels == (EmotionClass.ANGER,)
        assert outcome.pseudo_label_text == "anger"

    def test_equal_similarities_tie_break_by_ascending_id(self):
        vec = np.array([2.0, 0.0, 1.0])
        pool = [
            (make_record(id=name, gold=EmotionClass.AWE), make_embedding(name, vec[:2], vec[2:]))
            for name in ("zeta", "alpha", "mid")
        ]
        index_map = build_index(pool)
        outcome = retrieve(make_embedding("q", vec[:2], vec[2:]), "english", index_map, k=3)
        assert [n.id for n in outcome.neighbors] == ["alpha", "mid", "zeta"]


def gate_case(delta: float):
    """Pool + query whose best cosine similarity is 0.75 + delta.

    The pool vector [0.75, 0.5, 0.25, 0.25, 0.25] has dyadic components
    squaring to exactly 1, so it survives float32 storage and float64 unit
    normalization bit-exactly; a query of [1, 2*delta, 0, 0, 0] then shifts
    the dot product off 0.75 by delta (its own norm still rounds to 1.0).
    """
    record = make_record(id="n", gold=EmotionClass.SADNESS)
    pool = [(record, make_embedding("n", [0.75, 0.5], [0.25, 0.25, 0.25]))]
    query = make_embedding("q", [1.0, 2.0 * delta], [0.0, 0.0, 0.0])
    return pool, query


class TestThresholdGating:
    @pytest.mark.parametrize(
        "delta,expect_label",
        [(-1e-9, False), (0.0, False), (1e-9, True)],
    )
    def test_epsilon_band_around_eta(self, delta, expect_label):
        eta = 0.75
        pool, query = gate_case(delta)
        index_map = build_index(pool)
        outcome = retrieve(query, "english", index_map, eta=eta)
        assert abs(outcome.neighbors[0].similarity - (eta + delta)) < 1e-12
        assert (outcome.pseudo_label is not None) == expect_label

    def test_gating_monotone_in_eta(self):
        rng = np.random.default_rng(5)
        pool = random_pool(rng, 12, 4, 4, languages=("english",))
        index_map = build_index(pool)
        vec = rng.normal(size=8)
        query = make_embedding("q", vec[:4], vec[4:])
        etas = [-1.5, 0.0, 0.5, 0.75, 0.9, 1.0, 1.1]
        gated = [
            retrieve(query, "english", index_map, eta=eta).pseudo_label is not None
            for eta in etas
        ]
        # Once gating turns off it stays off as eta rises.
        assert gated == sorted(gated, reverse=True)
        assert gated[0] is True  # eta < -1 always admits
        assert gated[-1] is False  # eta >= 1 never admits (non-duplicate query)


@st.composite
def pool_and_query(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    dim = draw(st.integers(min_value=2, max_value=6))
    d_v = dim // 2
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    pool = random_pool(rng, n, d_v, dim - d_v, languages=("english", "arabic"))
    qvec = rng.normal(size=dim)
    return pool, qvec, d_v


class TestRetrievalProperties:
    @settings(max_examples=60, deadline=None)
    @given(pool_and_query(), st.floats(min_value=0.001, max_value=1000.0))
    def test_scale_invariance_of_selection(self, pq, scale):
        pool, qvec, d_v = pq
        index_map = build_index(pool)
        q1 = make_embedding("q", qvec[:d_v], qvec[d_v:])
        q2 = make_embedding("q", qvec[:d_v] * scale, qvec[d_v:] * scale)
        a = retrieve(q1, "english", index_map, k=3)
        b = retrieve(q2, "english", index_map, k=3)
        assert [n.id for n in a.neighbors] == [n.id for n in b.neighbors]

    @settings(max_examples=60, deadline=None)
    @given(pool_and_query())
    def test_language_isolation(self, pq):
        pool, qvec, d_v = pq
        index_map = build_index(pool)
        query = make_embedding("q", qvec[:d_v], qvec[d_v:])
        english_ids = {r.id for r, _ in pool if r.language == "english"}
        outcome = retrieve(query, "english", index_map, k=5)
        assert all(n.id in english_ids for n in outcome.neighbors)

    @settings(max_examples=60, deadline=None)
    @given(pool_and_query())
    def test_leave_one_out_never_returns_self(self, pq):
        pool, _, _ = pq
        index_map = build_index(pool)
        record, emb = pool[0]
        try:
            outcome = retrieve(
                emb, record.language, index_map, k=10, exclude_id=record.id
            )
        except EmptyAfterExclusion:
            return
        assert record.id not in [n.id for n in outcome.neighbors]


class TestOutcomeJsonl:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        pool = random_pool(rng, 10, 4, 4)
        index_map = build_index(pool)
        outcomes = []
        for i in range(6):
            vec = rng.normal(size=8)
            outcomes.append(
                retrieve(
                    make_embedding(f"q{i}", vec[:4], vec[4:]),
                    ("english", "arabic", "chinese")[i % 3],
                    index_map,
                    k=2,
                    eta=0.5,
                )
            )
        path = tmp_path / "outcomes.jsonl"
        retrieval.write_outcomes(outcomes, path)
        loaded = retrieval.load_outcomes(path)
        assert [o.query_id for o in loaded] == [o.query_id for o in outcomes]
        for orig, back in zip(outcomes, loaded):
            assert back.neighbors == orig.neighbors
            assert back.pseudo_label_text == orig.pseudo_label_text
            assert back.threshold_used == orig.threshold_used

    def test_parse_serialize_parse_stable(self, tmp_path):
        rng = np.random.default_rng(23)
        pool = random_pool(rng, 8, 3, 3)
        index_map = build_index(pool)
        vec = rng.normal(size=6)
        outcome = retrieve(make_embedding("q", vec[:3], vec[3:]), "english", index_map, k=2)
        p1 = tmp_path / "o1.jsonl"
        p2 = tmp_path / "o2.jsonl"
        retrieval.write_outcomes([outcome], p1)
        retrieval.write_outcomes(retrieval.load_outcomes(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestIndexPersistence:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        pool = random_pool(rng, 15, 5, 3)
        index_map = build_index(pool)
        path = tmp_path / "index.npz"
        retrieval.save_index(index_map, path)
        loaded = retrieval.load_index(path)
        assert sorted(loaded) == sorted(index_map)
        for language, index in index_map.items():
            other = loaded[language]
            assert other.ids == index.ids
            assert other.labels == index.labels
            assert other.matrix.tobytes() == index.matrix.tobytes()

    def test_loaded_index_retrieves_identically(self, tmp_path):
        rng = np.random.default_rng(9)
        pool = random_pool(rng, 15, 5, 3)
        index_map = build_index(pool)
        path = tmp_path / "index.npz"
        retrieval.save_index(index_map, path)
        loaded = retrieval.load_index(path)
        vec = rng.normal(size=8)
        query = make_embedding("q", vec[:5], vec[5:])
        a = retrieve(query, "english", index_map, k=3)
        b = retrieve(query, "english", loaded, k=3)
        assert a.neighbors == b.neighbors


class TestNormalizeParts:
    def test_part_normalization_changes_modality_weighting(self):
        # Image part dominates the joint norm; part-normalization restores
        # balance, flipping which neighbor wins.
        pool = [
            (
                make_record(id="imgheavy", gold=EmotionClass.AWE),
                make_embedding("imgheavy", [100.0, 0.0], [0.0, 1.0]),
            ),
            (
                make_record(id="txtmatch", gold=EmotionClass.FEAR),
                make_embedding("txtmatch", [0.0, 100.0], [1.0, 0.0]),
            ),
        ]
        query = make_embedding("q", [100.0, 0.0], [1.0, 0.0])
        joint_only = build_index(pool, normalize_parts=False)
        per_part = build_index(pool, normalize_parts=True)
        a = retrieve(query, "english", joint_only)
        b = retrieve(query, "english", per_part)
        assert a.neighbors[0].id == "imgheavy"
        assert b.neighbors[0].id == "imgheavy"
        # Per-part weighting lifts the text-matching neighbor's score.
        sim_txt_joint = [n for n in retrieve(query, "english", joint_only, k=2).neighbors]
        sim_txt_part = [n for n in retrieve(query, "english", per_part, k=2).neighbors]
        joint_gap = sim_txt_joint[0].similarity - sim_txt_joint[1].similarity
        part_gap = sim_txt_part[0].similarity - sim_txt_part[1].similarity
        assert part_gap < joint_gap
