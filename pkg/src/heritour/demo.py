"""Self-contained demo site: a small Roman villa visit.

Writes a complete service tree (config, journey template, action schemas,
rules, walk graph, trackables, assets, published editorial content, auth
tokens) so `heritour serve` and the simulator can run against something
real. Tests and the end-to-end suite build their fixtures through here too.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .content import ContentStore

SITE_LAT = 42.3498
SITE_LON = 13.3995

POIS = [
    # id, name, tags, difficulty, (dlat, dlon)
    ("entrance", "Villa Entrance", ["architecture"], 1, (0.0, 0.0)),
    ("atrium", "Atrium", ["architecture", "daily-life"], 1, (0.0002, 0.0002)),
    ("tablinum", "Tablinum", ["daily-life", "manuscripts"], 2, (0.0004, 0.0000)),
    ("peristyle", "Peristyle Garden", ["gardens", "architecture"], 2, (0.0002, 0.0005)),
    ("mosaic-hall", "Hall of Mosaics", ["mosaic", "art"], 3, (0.0004, 0.0007)),
    ("baths", "Thermal Baths", ["daily-life", "engineering"], 3, (0.0001, 0.0008)),
    ("cellar", "Storage Cellar", ["storage", "engineering"], 4, (0.0006, 0.0001)),
    ("belvedere", "Belvedere Terrace", ["landscape", "architecture"], 2, (0.0005, 0.0009)),
    ("crypt", "Lower Crypt", ["ritual", "mystery"], 4, (0.0008, 0.0002)),
]

EDGES = [
    ["entrance", "atrium"],
    ["atrium", "tablinum"],
    ["atrium", "peristyle"],
    ["peristyle", "mosaic-hall"],
    ["peristyle", "baths"],
    ["tablinum", "cellar"],
    ["mosaic-hall", "belvedere"],
    ["baths", "belvedere"],
    ["cellar", "crypt"],
]

CONDITIONS = {
    "cellar": {"min_total_points": 120},
    "belvedere": {"min_total_points": 200, "required_badges": ["Explorer"]},
    "crypt": {"required_badges": ["Explorer"]},
}

ACTION_SCHEMAS = {
    "POI_VISITED": {"poi_id": "string"},
    "QUIZ_COMPLETED": {"poi_id": "string", "correct": "int", "total": "int"},
    "ARTIFACT_SCANNED": {"poi_id": "string", "marker_code": "string"},
}

BASE_BODIES = {
    "entrance": "The villa opens onto the old road through a monumental gate. Carters once "
                "queued here at dawn; the wheel ruts are still cut into the threshold stone.",
    "atrium": "Rainwater fell through the open roof into the impluvium basin at the centre "
              "of the atrium. Around it, the household received guests and kept its shrine.",
    "tablinum": "The tablinum was the master's office and archive. Wax tablets and papyrus "
                "rolls recorded harvests, debts and letters to the provincial capital.",
    "peristyle": "A colonnaded garden cooled the private wing. Planting pits show rows of "
                 "box hedge, fruit trees and a fountain fed by the hillside cistern.",
    "mosaic-hall": "The banquet hall floor carries a marine mosaic of remarkable skill: "
                   "octopus, mullet and eel circle a central medallion of Neptune.",
    "baths": "The private bath suite moved bathers from cold to hot rooms over floors "
             "raised on brick pillars, heated by a wood-fired hypocaust.",
    "cellar": "Rows of half-buried dolia stored wine and oil at constant temperature. "
              "Capacity marks scratched on the rims tally a surprisingly large estate.",
    "belvedere": "From the terrace the whole valley unfolds: the aqueduct line, the road, "
                 "and on clear days the pass the villa's wine travelled through.",
    "crypt": "Beneath the cellar lies an older vaulted chamber reused as a family shrine. "
             "Lamp soot and a carved niche hint at rites held long after the villa fell.",
}


def _rules_text() -> str:
    lines = [
        "# Demo ruleset for the villa visit.",
        "",
        'rule "visit-steps" {',
        "  on action POI_VISITED",
        '  then award points 10 in "exploration"',
        "}",
        "",
        'rule "first-steps" {',
        "  on action POI_VISITED",
        '  when not player.has_badge("First Steps")',
        '  then award badge "First Steps"',
        "}",
        "",
    ]
    for poi_id, *_ in POIS:
        lines += [
            f'rule "quiz-{poi_id}" {{',
            "  on action QUIZ_COMPLETED",
            f'  when action.payload.correct >= 3 and action.payload.poi_id == "{poi_id}"',
            f'  then complete challenge "q-{poi_id}"; award points 30 in "knowledge"',
            "}",
            "",
        ]
    lines += [
        'rule "explorer-badge" {',
        "  on action QUIZ_COMPLETED",
        '  when player.points("knowledge") >= 60',
        '  then award badge "Explorer"',
        "}",
        "",
        'rule "perfect-quiz" {',
        "  on action QUIZ_COMPLETED",
        "  when action.payload.correct == action.payload.total and action.payload.total > 0",
        '  then award points 5 in "precision"',
        "}",
        "",
        'rule "crypt-shortcut" {',
        "  on action ARTIFACT_SCANNED",
        '  when action.payload.marker_code == "M-CRYPT"',
        '  then unlock poi "crypt"; award badge "Secret Keeper"',
        "}",
        "",
    ]
    return "\n".join(lines)


def _template_doc(site_name: str) -> dict:
    nodes = []
    for poi_id, name, tags, difficulty, (dlat, dlon) in POIS:
        nodes.append(
            {
                "id": poi_id,
                "name": name,
                "tags": tags,
                "difficulty": difficulty,
                "geo": {"lat": SITE_LAT + dlat, "lon": SITE_LON + dlon},
                "content_refs": [f"c-{poi_id}"],
                "challenge_refs": [f"q-{poi_id}"],
            }
        )
    return {"id": site_name, "nodes": nodes, "edges": EDGES, "conditions": CONDITIONS}


def _walkgraph_doc() -> dict:
    waypoints = {}
    for poi_id, _, _, _, (dlat, dlon) in POIS:
        waypoints[f"w-{poi_id}"] = [SITE_LAT + dlat, SITE_LON + dlon]
    edges = [[f"w-{a}", f"w-{b}", 25.0 + 5.0 * i] for i, (a, b) in enumerate(EDGES)]
    # a shortcut path so navigation has real alternatives
    edges.append(["w-atrium", "w-baths", 90.0])
    edges.append(["w-peristyle", "w-belvedere", 120.0])
    return {
        "coords": "geo",
        "waypoints": waypoints,
        "edges": edges,
        "poi_anchor": {poi_id: f"w-{poi_id}" for poi_id, *_ in POIS},
    }


def _trackables_doc() -> list[dict]:
    docs = []
    for i, (poi_id, *_rest) in enumerate(POIS, start=1):
        docs.append(
            {
                "id": f"t-marker-{poi_id}",
                "kind": "marker",
                "marker_code": f"M-{poi_id.upper()}" if poi_id == "crypt" else f"M-{i:03d}",
                "poi_id": poi_id,
                "overlay_refs": [f"ov-{poi_id}"],
            }
        )
    for poi_id, _, _, _, (dlat, dlon) in POIS[:4]:
        docs.append(
            {
                "id": f"t-fence-{poi_id}",
                "kind": "geofence",
                "lat": SITE_LAT + dlat,
                "lon": SITE_LON + dlon,
                "radius_m": 40.0,
                "poi_id": poi_id,
                "overlay_refs": [],
            }
        )
    docs.append(
        {
            "id": "t-anchor-mosaic",
            "kind": "anchor",
            "x": 12.5, "y": 0.0, "z": -3.2,
            "poi_id": "mosaic-hall",
            "overlay_refs": ["ov-mosaic-hall"],
        }
    )
    return docs


def _assets_doc() -> list[dict]:
    docs = []
    for poi_id, name, *_ in POIS:
        kind = "model3d" if poi_id in ("mosaic-hall", "crypt", "baths") else "image"
        docs.append(
            {
                "asset_id": f"ov-{poi_id}",
                "media_kind": kind,
                "uri": f"https://assets.example/villa/{poi_id}.{ 'glb' if kind == 'model3d' else 'png'}",
                "format_tag": "gltf" if kind == "model3d" else "png",
                "transform": {
                    "position": [0.0, 1.2, 0.0],
                    "rotation": [1.0, 0.0, 0.0, 0.0],
                    "scale": [1.0, 1.0, 1.0],
                },
            }
        )
    return docs


def create_demo_site(root: Path, visitors: int = 5, site_name: str = "villa-lucana",
                     seed: int = 7, host: str = "127.0.0.1", port: int = 8400) -> Path:
    """Build the full site tree under `root`; returns the config file path."""
    root = Path(root)
    content = root / "content"
    (content / "templates").mkdir(parents=True, exist_ok=True)
    (content / "site").mkdir(parents=True, exist_ok=True)
    rules_dir = root / "rules"
    rules_dir.mkdir(parents=True, exist_ok=True)
    (root / "data").mkdir(parents=True, exist_ok=True)

    (content / "templates" / f"{site_name}.json").write_text(
        json.dumps(_template_doc(site_name), indent=2), encoding="utf-8"
    )
    (content / "action_schemas.json").write_text(
        json.dumps(ACTION_SCHEMAS, indent=2), encoding="utf-8"
    )
    (content / "site" / "walkgraph.json").write_text(
        json.dumps(_walkgraph_doc(), indent=2), encoding="utf-8"
    )
    (content / "site" / "trackables.json").write_text(
        json.dumps(_trackables_doc(), indent=2), encoding="utf-8"
    )
    (content / "site" / "assets.json").write_text(
        json.dumps(_assets_doc(), indent=2), encoding="utf-8"
    )
    (rules_dir / "villa.grule").write_text(_rules_text(), encoding="utf-8")

    # seed editorial content through the real pipeline so the audit passes
    store = ContentStore(root=content / "editorial")
    for poi_id, body in BASE_BODIES.items():
        draft = store.submit_draft(poi_id, body, source="curated")
        store.review(draft.draft_id, "u-rev-demo", "approve", "baseline text")
        store.publish(draft.draft_id)

    rng = random.Random(seed)
    lines = [
        "# heritour demo configuration",
        f"listen_host = {host}",
        f"listen_port = {port}",
        "data_dir = ./data",
        "content_dir = ./content",
        "rules_dir = ./rules",
        f"template = {site_name}",
        "level_thresholds = 0,100,250,500,1000",
        "weight_pref = 1.0",
        "weight_novelty = 1.0",
        "weight_prox = 1.0",
        "weight_diff = 1.0",
        "ema_alpha = 0.3",
        "prox_half_distance_m = 100",
        "provider = template",
        "",
        "# pseudonymous visitors (bearer token -> random user id)",
    ]
    for i in range(1, visitors + 1):
        user_id = f"u-{rng.getrandbits(48):012x}"
        lines.append(f"auth_token.tok-v{i:03d} = {user_id}")
    lines.append(f"auth_token.tok-curator = reviewer:u-{rng.getrandbits(48):012x}")
    config_path = root / "heritour.conf"
    config_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return config_path
