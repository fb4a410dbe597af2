from random import Random

import pytest
from hypothesis import given, strategies as st

from heritour.ar import SiteWalkGraph
from heritour.content import ContentStatus, ContentStore
from heritour.engine import GameAction
from heritour.errors import NoBaseContentError
from heritour.journey import (
    JourneyState,
    JourneyTemplate,
    NodeStatus,
    PointOfInterest,
    instantiate,
)
from heritour.recommend import (
    ScoreWeights,
    TemplateNarrativeProvider,
    UserProfile,
    generate_story,
    recommend_next,
    replan_path,
    score_poi,
    update_profile,
    walk_distance_m,
)

from conftest import enumerate_shortest, random_dag

EQUAL = ScoreWeights(1, 1, 1, 1)
NO_SITE = SiteWalkGraph()


def poi(pid="p", tags=(), difficulty=3, **kw):
    return PointOfInterest(id=pid, name=pid.upper(), tags=frozenset(tags), difficulty=difficulty, **kw)


def profile(affinity=None, preferred=3, visited=None):
    return UserProfile(
        user_id="u1",
        tag_affinity=affinity or {},
        preferred_difficulty=preferred,
        visited_tags=visited or {},
    )


def line_site(length: float) -> SiteWalkGraph:
    return SiteWalkGraph(
        waypoints={"A": (0.0, 0.0), "B": (0.0, 1.0)},
        coords="local",
        edges=[("A", "B", length)],
        poi_anchor={"p": "B"},
    )


class TestScorePoi:
    def test_empty_tags_unknown_position(self):
        rec = score_poi(poi(tags=()), profile(), None, EQUAL, NO_SITE)
        assert rec.components == {"pref": 0.0, "novelty": 1.0, "prox": 1.0, "diff": 1.0}
        assert rec.score == pytest.approx(0.75)

    def test_maximum_case(self):
        rec = score_poi(poi(tags=("roman",)), profile(affinity={"roman": 1.0}), None, EQUAL, NO_SITE)
        assert rec.score == pytest.approx(1.0)

    def test_hand_computed_mixed_case(self):
        rec = score_poi(
            poi(tags=("roman", "mosaic"), difficulty=5),
            profile(affinity={"roman": 0.8}, preferred=3, visited={"roman": 2}),
            "A",
            EQUAL,
            line_site(100.0),
        )
        assert rec.components["pref"] == pytest.approx(0.4)
        assert rec.components["novelty"] == pytest.approx(0.5)
        assert rec.components["prox"] == pytest.approx(0.5)
        assert rec.components["diff"] == pytest.approx(0.5)
        assert rec.score == pytest.approx(0.475)

    def test_rationale_mentions_distance(self):
        rec = score_poi(poi(), profile(), "A", EQUAL, line_site(100.0))
        assert "100 m" in rec.rationale

    def test_components_bounded_fuzz(self):
        rng = Random(17)
        tags = ["t1", "t2", "t3", "t4"]
        for _ in range(300):
            p = poi(
                tags=rng.sample(tags, rng.randint(0, 4)),
                difficulty=rng.randint(1, 5),
            )
            prof = profile(
                affinity={t: rng.random() for t in rng.sample(tags, rng.randint(0, 4))},
                preferred=rng.randint(1, 5),
                visited={t: rng.randint(0, 3) for t in rng.sample(tags, rng.randint(0, 4))},
            )
            site = line_site(rng.uniform(0.5, 5000))
            position = rng.choice([None, "A", "B", (0.0, 0.5)])
            rec = score_poi(p, prof, position, EQUAL, site)
            for name, value in rec.components.items():
                assert 0.0 <= value <= 1.0, name
            assert 0.0 <= rec.score <= 1.0

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            ScoreWeights(0, 0, 0, 0)
        with pytest.raises(ValueError):
            ScoreWeights(-1, 1, 1, 1)


class TestWalkDistance:
    def test_unknown_position(self):
        assert walk_distance_m(NO_SITE, None, poi()) is None

    def test_waypoint_to_anchor(self):
        assert walk_distance_m(line_site(42.0), "A", poi()) == pytest.approx(42.0)

    def test_geo_position_snaps_to_nearest(self):
        site = SiteWalkGraph(
            waypoints={"A": (0.0, 0.0), "B": (3.0, 4.0)},
            coords="local",
            edges=[("A", "B", 5.0)],
            poi_anchor={"p": "B"},
        )
        # (0, 1) lies 1 m from A, then 5 m along the edge
        assert walk_distance_m(site, (0.0, 1.0), poi()) == pytest.approx(6.0)

    def test_unanchored_poi_unknown(self):
        assert walk_distance_m(line_site(10.0), "A", poi("other")) is None


def oracle_score(p, prof, position, w, site) -> float:
    """Independent re-derivation; walk distance by exhaustive enumeration."""
    if p.tags:
        pref = sum(prof.tag_affinity.get(t, 0.0) for t in p.tags) / len(p.tags)
        seen = {t for t, n in prof.visited_tags.items() if n > 0}
        novelty = 1.0 - len(p.tags & seen) / max(1, len(p.tags))
    else:
        pref, novelty = 0.0, 1.0
    d = 0.0
    anchor = site.poi_anchor.get(p.id)
    if position is not None and anchor is not None:
        found = enumerate_shortest(list(site.waypoints), site.edges, position, anchor)
        if found is not None:
            d = found[1]
    prox = 1.0 / (1.0 + d / 100.0)
    diff = 1.0 - abs(p.difficulty - prof.preferred_difficulty) / 4.0
    return (w.w_pref * pref + w.w_novelty * novelty + w.w_prox * prox + w.w_diff * diff) / (
        w.w_pref + w.w_novelty + w.w_prox + w.w_diff
    )


def random_scene(rng: Random, n_pois: int):
    waypoints = {f"w{i}": (float(i), float(rng.randint(0, 5))) for i in range(6)}
    names = sorted(waypoints)
    edges = [
        (names[i], names[i + 1], float(rng.randint(1, 300))) for i in range(len(names) - 1)
    ]
    for _ in range(3):
        a, b = rng.sample(names, 2)
        edges.append((a, b, float(rng.randint(1, 300))))
    pois = [
        poi(f"p{i}", tags=rng.sample(["t1", "t2", "t3"], rng.randint(0, 3)),
            difficulty=rng.randint(1, 5))
        for i in range(n_pois)
    ]
    anchor = {p.id: rng.choice(names) for p in pois if rng.random() < 0.8}
    site = SiteWalkGraph(waypoints=waypoints, coords="local", edges=edges, poi_anchor=anchor)
    prof = profile(
        affinity={t: round(rng.random(), 3) for t in ["t1", "t2", "t3"] if rng.random() < 0.7},
        preferred=rng.randint(1, 5),
        visited={t: rng.randint(0, 2) for t in ["t1", "t2"] if rng.random() < 0.5},
    )
    position = rng.choice([None] + names)
    return pois, site, prof, position


def frontier_template_state(pois):
    template = JourneyTemplate(
        id="t-flat", nodes={p.id: p for p in pois}, edges=frozenset()
    )
    state = JourneyState(
        user_id="u1",
        template_id="t-flat",
        node_status={p.id: NodeStatus.UNLOCKED for p in pois},
    )
    return template, state


class TestRecommendNext:
    def test_empty_frontier(self):
        t = JourneyTemplate(id="t", nodes={"a": poi("a")}, edges=frozenset())
        state = JourneyState(
            user_id="u1", template_id="t", node_status={"a": NodeStatus.COMPLETED}
        )
        assert recommend_next(t, state, profile(), None, EQUAL, NO_SITE) is None

    def test_single_candidate(self):
        t = JourneyTemplate(id="t", nodes={"a": poi("a")}, edges=frozenset())
        rec = recommend_next(t, instantiate(t, "u1"), profile(), None, EQUAL, NO_SITE)
        assert rec is not None and rec.poi_id == "a"

    def test_matches_exhaustive_argmax(self):
        rng = Random(515)
        for _ in range(100):
            pois, site, prof, position = random_scene(rng, rng.randint(1, 6))
            template, state = frontier_template_state(pois)
            rec = recommend_next(template, state, prof, position, EQUAL, site)
            scored = [(oracle_score(p, prof, position, EQUAL, site), p.id) for p in pois]
            best_score = max(s for s, _ in scored)
            expected = min(pid for s, pid in scored if s == best_score)
            assert rec is not None
            assert rec.poi_id == expected
            assert rec.score == pytest.approx(best_score, abs=1e-12)

    def test_weight_scaling_keeps_argmax(self):
        rng = Random(616)
        for _ in range(60):
            pois, site, prof, position = random_scene(rng, rng.randint(2, 6))
            template, state = frontier_template_state(pois)
            base = recommend_next(template, state, prof, position, EQUAL, site)
            scale = rng.choice([0.25, 3.0, 17.5])
            scaled = ScoreWeights(scale, scale, scale, scale)
            again = recommend_next(template, state, prof, position, scaled, site)
            assert base is not None and again is not None
            assert again.poi_id == base.poi_id


class TestReplanPath:
    def test_chain_is_forced(self):
        t = JourneyTemplate(
            id="t",
            nodes={x: poi(x) for x in ("a", "b", "c")},
            edges=frozenset({("a", "b"), ("b", "c")}),
        )
        order = replan_path(t, instantiate(t, "u1"), profile(), None, EQUAL, NO_SITE)
        assert order == ["a", "b", "c"]

    def test_diamond_prefers_higher_score(self):
        nodes = {
            "a": poi("a"),
            "b": poi("b", tags=("loved",)),
            "c": poi("c", tags=("ignored",)),
            "d": poi("d"),
        }
        t = JourneyTemplate(
            id="t",
            nodes=nodes,
            edges=frozenset({("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")}),
        )
        prof = profile(affinity={"loved": 1.0, "ignored": 0.0})
        order = replan_path(t, instantiate(t, "u1"), prof, None, EQUAL, NO_SITE)
        assert order == ["a", "b", "c", "d"]

    def test_random_dags_yield_topological_orders(self):
        rng = Random(717)
        for _ in range(80):
            t = random_dag(rng, max_nodes=8, conditions=False)
            state = instantiate(t, "u1")
            prof = profile(affinity={tag: rng.random() for tag in ("roman", "mosaic")})
            order = replan_path(t, state, prof, None, EQUAL, NO_SITE)
            assert sorted(order) == sorted(t.nodes)
            position = {n: i for i, n in enumerate(order)}
            for a, b in t.edges:
                assert position[a] < position[b]


class TestUpdateProfile:
    def action(self, kind="POI_VISITED"):
        return GameAction("a1", "u1", kind, {"poi_id": "p"}, "", 1)

    def test_visit_signal(self):
        updated = update_profile(profile(), self.action(), poi(tags=("roman",)))
        assert updated.tag_affinity["roman"] == pytest.approx(0.15)
        assert updated.visited_tags == {"roman": 1}

    def test_success_fixed_point(self):
        prof = profile(affinity={"roman": 1.0})
        updated = update_profile(prof, self.action(), poi(tags=("roman",)), challenge_succeeded=True)
        assert updated.tag_affinity["roman"] == pytest.approx(1.0)

    def test_two_successes_from_zero(self):
        prof = profile()
        p = poi(tags=("roman",))
        prof = update_profile(prof, self.action(), p, challenge_succeeded=True)
        assert prof.tag_affinity["roman"] == pytest.approx(0.3)
        prof = update_profile(prof, self.action(), p, challenge_succeeded=True)
        assert prof.tag_affinity["roman"] == pytest.approx(0.51)

    @given(
        initial=st.floats(min_value=0.0, max_value=1.0),
        succeeded=st.booleans(),
        rounds=st.integers(min_value=1, max_value=20),
    )
    def test_affinity_stays_bounded(self, initial, succeeded, rounds):
        prof = profile(affinity={"roman": initial})
        p = poi(tags=("roman",))
        for _ in range(rounds):
            prof = update_profile(prof, self.action(), p, challenge_succeeded=succeeded)
            assert 0.0 <= prof.tag_affinity["roman"] <= 1.0


class TestGenerateStory:
    def _store_with_base(self):
        store = ContentStore()
        draft = store.submit_draft("p", "The long base text about this place. " * 12)
        store.review(draft.draft_id, "rev-1", "approve")
        store.publish(draft.draft_id)
        return store

    def test_draft_status_and_excerpt(self):
        store = self._store_with_base()
        draft = generate_story(poi(), profile(), store)
        assert draft.status is ContentStatus.DRAFT
        assert draft.source == "generated"
        assert "Welcome to P." in draft.body
        assert "The long base text" in draft.body

    def test_deterministic_bodies(self):
        store = self._store_with_base()
        one = generate_story(poi(), profile(), store)
        two = generate_story(poi(), profile(), store)
        assert one.body == two.body
        assert one.draft_id != two.draft_id

    def test_top_tag_hook(self):
        store = self._store_with_base()
        draft = generate_story(poi(), profile(affinity={"mosaic": 0.9, "roman": 0.2}), store)
        assert "mosaic" in draft.body

    def test_requires_base_content(self):
        with pytest.raises(NoBaseContentError):
            generate_story(poi(), profile(), ContentStore())

    def test_provider_output_never_auto_published(self):
        store = self._store_with_base()
        generate_story(poi(), profile(), store, TemplateNarrativeProvider())
        published = store.fetch_published("p")
        assert "Welcome to" not in published.body
