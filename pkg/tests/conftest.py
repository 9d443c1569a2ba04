"""Shared fixture builders: synthetic catalogs, transcript-replay scripts,
and canonical galleries used across the suite."""

from __future__ import annotations

import json
import math

import pytest

from amigo.catalog import Catalog, load_catalog
from amigo.episodes import Episode, EpisodeConfig
from amigo.rng import SplitMix64


def make_doc(types, values, items, synonyms=None, version="1") -> dict:
    """Assemble a catalog document from terse tuples.

    types: (id, display_name, forbidden)
    values: (id, type_id, canonical_name, [templates])
    items: (id, {value_id: "present"|"absent"|"unknown"})
    """
    return {
        "version": version,
        "attribute_types": [
            {"id": t[0], "display_name": t[1], "forbidden": t[2]} for t in types
        ],
        "attribute_values": [
            {
                "id": v[0],
                "type_id": v[1],
                "canonical_name": v[2],
                "question_templates": list(v[3]),
            }
            for v in values
        ],
        "items": [{"id": i[0], "labels": dict(i[1])} for i in items],
        "synonyms": dict(synonyms or {}),
    }


def catalog_from_doc(doc: dict) -> Catalog:
    return load_catalog(json.dumps(doc).encode("utf-8"))


def make_episode(gallery, target_position, tau=0.5, seed=0, pool_size=None) -> Episode:
    gallery = tuple(gallery)
    return Episode(
        episode_id=f"fix-{gallery[target_position - 1]}-s{seed}",
        gallery=gallery,
        target_position=target_position,
        config=EpisodeConfig(tau=tau, gallery_size=len(gallery), seed=seed),
        pool_size=pool_size if pool_size is not None else len(gallery) - 1,
    )


# --------------------------------------------------------------------------
# Synthetic 200-item / 40-value catalog (episode generation and round-trip)
# --------------------------------------------------------------------------


def synthetic_catalog_doc(
    n_items: int = 200, n_values: int = 40, n_types: int = 12, seed: int = 20240501
) -> dict:
    rng = SplitMix64(seed)
    types = [(f"t{k:02d}", f"Attribute family {k}", False) for k in range(n_types)]
    values = []
    for j in range(n_values):
        type_id = f"t{j % n_types:02d}"
        values.append(
            (
                f"v{j:02d}",
                type_id,
                f"feature {j:02d}",
                [f"Does the dress have feature {j:02d}?"],
            )
        )
    items = []
    for i in range(n_items):
        labels = {}
        for j in range(n_values):
            roll = rng.below(100)
            if roll < 30:
                labels[f"v{j:02d}"] = "present"
            elif roll < 65:
                labels[f"v{j:02d}"] = "absent"
            # otherwise unlabeled: implicit unknown
        if not any(lab == "present" for lab in labels.values()):
            labels[f"v{rng.below(n_values):02d}"] = "present"
        items.append((f"d{i:03d}", labels))
    return make_doc(types, values, items)


@pytest.fixture(scope="session")
def big_doc() -> dict:
    return synthetic_catalog_doc()


@pytest.fixture(scope="session")
def big_catalog(big_doc) -> Catalog:
    return catalog_from_doc(big_doc)


# --------------------------------------------------------------------------
# Fully discriminating binary-code catalogs (greedy bound)
# --------------------------------------------------------------------------


def binary_code_catalog(n_items: int) -> Catalog:
    """n items with distinct nonzero binary label patterns; every value is
    its own attribute type, so binary questioning never trips the
    enumeration rule."""
    bits = max(2, math.ceil(math.log2(n_items + 1)))
    types = [(f"bt{b}", f"Bit {b}", False) for b in range(bits)]
    values = [
        (f"bit{b}", f"bt{b}", f"marker {b}", [f"Does the dress have marker {b}?"])
        for b in range(bits)
    ]
    items = []
    for i in range(n_items):
        code = i + 1  # skip the all-zero pattern: items need a Present label
        labels = {
            f"bit{b}": "present" if (code >> b) & 1 else "absent" for b in range(bits)
        }
        items.append((f"c{i:02d}", labels))
    return catalog_from_doc(make_doc(types, values, items))


# --------------------------------------------------------------------------
# Sparse random-label catalog (noise robustness)
# --------------------------------------------------------------------------


def sparse_label_catalog(n_items: int = 48, n_values: int = 16, seed: int = 7) -> Catalog:
    """Random binary labels with distinct patterns; sparse enough that a
    flipped answer usually empties the feasible set instead of landing on a
    different item."""
    rng = SplitMix64(seed)
    types = [(f"st{j}", f"Detail {j}", False) for j in range(n_values)]
    values = [
        (f"sv{j}", f"st{j}", f"detail {j}", [f"Does the dress have detail {j}?"])
        for j in range(n_values)
    ]
    seen = set()
    items = []
    while len(items) < n_items:
        pattern = tuple(rng.below(2) for _ in range(n_values))
        if sum(pattern) == 0 or pattern in seen:
            continue
        seen.add(pattern)
        labels = {
            f"sv{j}": "present" if bit else "absent" for j, bit in enumerate(pattern)
        }
        items.append((f"n{len(items):02d}", labels))
    return catalog_from_doc(make_doc(types, values, items))


# --------------------------------------------------------------------------
# Transcript-replay fixtures: three production failure transcripts encoded
# as catalog + gallery + script.  Expected per-turn classifications ride
# along so tests can assert the exact Skip/Valid labeling.
# --------------------------------------------------------------------------


def replay_fixture_short() -> dict:
    """Nine-turn episode: four forbidden-topic Skips, wrong final guess."""
    types = [
        ("skirt_style", "Skirt style", False),
        ("fabric_finish", "Fabric finish", False),
        ("front_construction", "Front construction", False),
        ("hemline_shape", "Hemline shape", False),
        ("hem_trim", "Hem trim", False),
        ("sleeve_length", "Sleeve length", True),
        ("garment_length", "Garment length", True),
        ("color", "Color", True),
    ]
    values = [
        ("tiered_skirt", "skirt_style", "tiered skirt",
         ["Does the dress have a tiered skirt?"]),
        ("satin_sheen", "fabric_finish", "satin-like fabric",
         ["Is the dress made of a shiny or satin-like fabric?"]),
        ("wrap_front", "front_construction", "wrap-style front",
         ["Does the dress have a wrap-style front?",
          "Does the dress have a wrap-front design?",
          "Is the dress featured with wrap-style front?"]),
        ("high_low", "hemline_shape", "high-low hemline",
         ["Does the dress have a high-low hemline?"]),
        ("ruffled_hem", "hem_trim", "ruffled hem",
         ["Does the dress have a ruffled hem?"]),
        ("long_sleeves", "sleeve_length", "long sleeves",
         ["Does the dress have long sleeves?"]),
        ("sleeveless", "sleeve_length", "sleeveless",
         ["Is the dress sleeveless?"]),
        ("floor_length", "garment_length", "floor-length",
         ["Is the dress floor-length?"]),
        ("solid_color", "color", "solid color",
         ["Is the dress in a solid color?"]),
    ]
    lab = lambda t, s, w, h, r: {  # noqa: E731
        "tiered_skirt": t, "satin_sheen": s, "wrap_front": w,
        "high_low": h, "ruffled_hem": r,
    }
    items = [
        ("g01", lab("present", "absent", "absent", "present", "absent")),
        ("g02", lab("present", "present", "absent", "absent", "present")),
        ("g03", lab("absent", "present", "present", "unknown", "absent")),
        ("g04", lab("present", "present", "present", "absent", "present")),
        ("g05", lab("present", "present", "present", "absent", "present")),
        ("g06", lab("absent", "absent", "absent", "present", "present")),
    ]
    script = [
        "Does the dress have a tiered skirt?",
        "Is the dress made of a shiny or satin-like fabric?",
        "Does the dress have long sleeves?",
        "Is the dress sleeveless?",
        "Does the dress have a wrap-style front?",
        "Is the dress floor-length?",
        "Does the dress have a high-low hemline?",
        "Is the dress in a solid color?",
        "Does the dress have a ruffled hem?",
        "My guess of your favorite dress: #2.",
    ]
    return {
        "catalog": catalog_from_doc(make_doc(types, values, items)),
        "gallery": [i[0] for i in items],
        "target_position": 5,
        "script": script,
        "expected_classifications": [
            "valid", "valid", "forbidden_attribute", "forbidden_attribute",
            "valid", "forbidden_attribute", "valid", "forbidden_attribute", "valid",
        ],
        "expected_verdicts": [
            "yes", "yes", "skip", "skip", "yes", "skip", "no", "skip", "yes",
        ],
        "guess_index": 2,
    }


def replay_fixture_enumeration() -> dict:
    """Twenty-turn budget-exhausted episode: ten Skips mixing forbidden
    topics and value enumeration, no final guess."""
    types = [
        ("neckline", "Neckline", False),
        ("bodice_silhouette", "Bodice silhouette", False),
        ("bodice_texture", "Bodice texture", False),
        ("skirt_silhouette", "Skirt silhouette", False),
        ("sleeve_style", "Sleeve style", False),
        ("slit", "Slit", False),
        ("hemline_shape", "Hemline shape", False),
        ("hemline_cut", "Hemline cut", False),
        ("hem_trim", "Hem trim", False),
        ("waist_shape", "Waist shape", False),
        ("sleeve_length", "Sleeve length", True),
        ("prints", "Prints", True),
        ("garment_length", "Garment length", True),
        ("color", "Color", True),
    ]
    values = [
        ("v_neckline", "neckline", "V-neckline",
         ["Does your favorite dress feature a V-neckline?"]),
        ("off_shoulder", "neckline", "off-the-shoulder neckline",
         ["Does your favorite dress have an off-the-shoulder neckline?"]),
        ("square_neck", "neckline", "square neckline",
         ["Does your favorite dress have a square neckline?"]),
        ("sweetheart", "neckline", "sweetheart neckline",
         ["Does your favorite dress have a sweetheart neckline?"]),
        ("wrap_bodice", "bodice_silhouette", "wrap-style bodice",
         ["Does your favorite dress have a wrap-style bodice?"]),
        ("smocked_bodice", "bodice_texture", "smocked bodice",
         ["Does your favorite dress have a smocked bodice?"]),
        ("tiered_skirt", "skirt_silhouette", "tiered skirt",
         ["Does your favorite dress have a tiered skirt?"]),
        ("flared_skirt", "skirt_silhouette", "flared skirt",
         ["Does your favorite dress have a flared skirt?"]),
        ("flutter_sleeves", "sleeve_style", "flutter sleeves",
         ["Does your favorite dress have flutter sleeves?"]),
        ("side_slit", "slit", "side slit",
         ["Does your favorite dress have a side slit?"]),
        ("high_low", "hemline_shape", "high-low hemline",
         ["Does your favorite dress have a high-low hemline?"]),
        ("straight_hem", "hemline_cut", "straight hemline",
         ["Does your favorite dress have a straight hemline?"]),
        ("ruffled_hemline", "hem_trim", "ruffled hemline",
         ["Does your favorite dress have a ruffled hemline?"]),
        ("fitted_waist", "waist_shape", "fitted waist",
         ["Does your favorite dress have a fitted waist?"]),
        ("long_sleeves", "sleeve_length", "long sleeves",
         ["Does your favorite dress have long sleeves?"]),
        ("floral_print", "prints", "floral print",
         ["Does your favorite dress have a floral print?"]),
        ("leaf_print", "prints", "leaf print",
         ["Does your favorite dress have a leaf print?"]),
        ("midi_length", "garment_length", "midi length",
         ["Does your favorite dress have a midi length?"]),
        ("maxi_length", "garment_length", "maxi length",
         ["Does your favorite dress have a maxi length?"]),
        ("solid_color", "color", "solid color",
         ["Does your favorite dress have a solid color?"]),
    ]
    target = {
        "v_neckline": "absent", "wrap_bodice": "absent", "tiered_skirt": "absent",
        "smocked_bodice": "present", "flutter_sleeves": "absent",
        "side_slit": "present", "high_low": "absent", "straight_hem": "absent",
        "ruffled_hemline": "absent", "fitted_waist": "present",
    }
    items = [
        ("h01", {"v_neckline": "present", "tiered_skirt": "present",
                 "fitted_waist": "absent"}),
        ("h02", {"wrap_bodice": "present", "side_slit": "absent",
                 "smocked_bodice": "absent"}),
        ("h03", target),
        ("h04", {"smocked_bodice": "present", "side_slit": "absent",
                 "high_low": "present"}),
        ("h05", {"flutter_sleeves": "present", "straight_hem": "present",
                 "v_neckline": "absent"}),
        ("h06", {"ruffled_hemline": "present", "fitted_waist": "present",
                 "tiered_skirt": "absent"}),
        ("h07", {"square_neck": "present", "smocked_bodice": "present",
                 "side_slit": "present", "fitted_waist": "absent"}),
    ]
    script = [
        "Does your favorite dress feature a V-neckline?",
        "Does your favorite dress have an off-the-shoulder neckline?",
        "Does your favorite dress have a square neckline?",
        "Does your favorite dress have a sweetheart neckline?",
        "Does your favorite dress have a wrap-style bodice?",
        "Does your favorite dress have a tiered skirt?",
        "Does your favorite dress have a smocked bodice?",
        "Does your favorite dress have flutter sleeves?",
        "Does your favorite dress have long sleeves?",
        "Does your favorite dress have a side slit?",
        "Does your favorite dress have a floral print?",
        "Does your favorite dress have a leaf print?",
        "Does your favorite dress have a high-low hemline?",
        "Does your favorite dress have a straight hemline?",
        "Does your favorite dress have a ruffled hemline?",
        "Does your favorite dress have a flared skirt?",
        "Does your favorite dress have a fitted waist?",
        "Does your favorite dress have a midi length?",
        "Does your favorite dress have a maxi length?",
        "Does your favorite dress have a solid color?",
    ]
    return {
        "catalog": catalog_from_doc(make_doc(types, values, items)),
        "gallery": [i[0] for i in items],
        "target_position": 3,
        "script": script,
        "expected_classifications": [
            "valid",
            "enumeration_across_turns",
            "enumeration_across_turns",
            "enumeration_across_turns",
            "valid",
            "valid",
            "valid",
            "valid",
            "forbidden_attribute",
            "valid",
            "forbidden_attribute",
            "forbidden_attribute",
            "valid",
            "valid",
            "valid",
            "enumeration_across_turns",
            "valid",
            "forbidden_attribute",
            "forbidden_attribute",
            "forbidden_attribute",
        ],
        "expected_verdicts": [
            "no", "skip", "skip", "skip", "no", "no", "yes", "no", "skip", "yes",
            "skip", "skip", "no", "no", "no", "skip", "yes", "skip", "skip", "skip",
        ],
        "guess_index": None,
    }


def replay_fixture_compound() -> dict:
    """Twenty-turn budget-exhausted episode: twelve Skips, nine of them
    compound re-statements of already-confirmed values."""
    types = [
        ("fabric_material", "Fabric material", False),
        ("silhouette_front", "Front silhouette", False),
        ("neckline", "Neckline", False),
        ("skirt_silhouette", "Skirt silhouette", False),
        ("slit", "Slit", False),
        ("waist_detail", "Waist detail", False),
        ("texture_detail", "Texture detail", False),
        ("hemline_shape", "Hemline shape", False),
        ("prints", "Prints", True),
    ]
    values = [
        ("velvet", "fabric_material", "velvet",
         ["Is your favorite dress made of velvet fabric?"]),
        ("wrap_style", "silhouette_front", "wrap-style",
         ["Is your favorite dress a wrap-style dress?"]),
        ("v_neckline", "neckline", "V-neckline",
         ["Does your favorite dress have a V-neckline?"]),
        ("strapless", "neckline", "strapless neckline",
         ["Does your favorite dress have a strapless neckline?"]),
        ("sweetheart", "neckline", "sweetheart neckline",
         ["Does your favorite dress have a sweetheart neckline?"]),
        ("tiered_skirt", "skirt_silhouette", "tiered skirt",
         ["Does your favorite dress have a tiered skirt?"]),
        ("slit", "slit", "slit",
         ["Does your favorite dress have a slit?"]),
        ("waist_tie", "waist_detail", "belt or tie at the waist",
         ["Does your favorite dress have a belt or tie at the waist?"]),
        ("ruched", "texture_detail", "ruched",
         ["Does your favorite dress have a ruched detail?"]),
        ("high_low", "hemline_shape", "high-low hemline",
         ["Does your favorite dress have a high-low hemline?"]),
        ("floral_print", "prints", "floral print",
         ["Does your favorite dress have a floral print?"]),
    ]
    target = {
        "velvet": "absent", "wrap_style": "present", "v_neckline": "present",
        "tiered_skirt": "absent", "slit": "present", "waist_tie": "absent",
        "ruched": "present", "high_low": "present",
    }
    rng = SplitMix64(99)
    items = []
    value_ids = [v[0] for v in values if v[0] != "floral_print"]
    for i in range(14):
        if i == 8:
            items.append(("k08", target))
            continue
        labels = {}
        for vid in value_ids:
            roll = rng.below(3)
            labels[vid] = ("present", "absent", "unknown")[roll]
        if not any(lab == "present" for lab in labels.values()):
            labels["velvet"] = "present"
        items.append((f"k{i:02d}", labels))
    script = [
        "Is your favorite dress made of velvet fabric?",
        "Is your favorite dress a wrap-style dress?",
        "Does your favorite dress have a floral print?",
        "Does your favorite dress have a V-neckline?",
        "Does your favorite dress have a tiered skirt?",
        "Does your favorite dress have a slit?",
        "Does your favorite dress have a belt or tie at the waist?",
        "Does your favorite dress have a ruched detail?",
        "Does your favorite dress have a strapless neckline?",
        "Does your favorite dress have a sweetheart neckline?",
        "Does your favorite dress have a high-low hemline?",
        "Does your favorite dress have a wrap-style bodice with a V-neckline, "
        "a ruched detail, and a high-low hemline?",
        "Does your favorite dress have a wrap-style bodice with a V-neckline "
        "and a high-low hemline?",
        "Does your favorite dress have a V-neckline and a high-low hemline?",
        "Does your favorite dress have a V-neckline and a slit?",
        "Does your favorite dress have a V-neckline and ruched detailing?",
        "Does your favorite dress have a wrap-style bodice and a high-low hemline?",
        "Does your favorite dress have a wrap-style bodice and a slit?",
        "Does your favorite dress have a V-neckline and a wrap-style bodice?",
        "Does your favorite dress have a V-neckline and a ruched detail?",
    ]
    compound = "compound_re_enumeration"
    return {
        "catalog": catalog_from_doc(make_doc(types, values, items)),
        "gallery": [i[0] for i in items],
        "target_position": 9,
        "script": script,
        "expected_classifications": [
            "valid", "valid", "forbidden_attribute", "valid", "valid", "valid",
            "valid", "valid", "enumeration_across_turns", "enumeration_across_turns",
            "valid", compound, compound, compound, compound, compound, compound,
            compound, compound, compound,
        ],
        "expected_verdicts": [
            "no", "yes", "skip", "yes", "no", "yes", "no", "yes", "skip", "skip",
            "yes", "skip", "skip", "skip", "skip", "skip", "skip", "skip", "skip",
            "skip",
        ],
        "guess_index": None,
    }
