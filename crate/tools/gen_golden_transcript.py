#!/usr/bin/env python3
"""Writes the 30-response replay transcript used by the end-to-end golden test.

Fourteen choose/run turns, two of them with one invalid run call that the
agent repairs, and one go_back_to_step. A fifteenth turn cannot start
because the budget is spent.
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/golden/transcript.json"


def choose(name, why):
    return f'{why}\n<action tag="choose">\n<name>{name}</name>\n</action>'


def run(body, why):
    return f'{why}\n<action tag="run">\n{body}\n</action>'


def backbone(mover, params=None, selectors=None, selector_name=None):
    parts = ["<name>backbone_change</name>", f"<mover_name>{mover}</mover_name>"]
    if params:
        parts.append(f"<mover_params>{params}</mover_params>")
    if selectors:
        parts.append(f"<residue_selectors>\n{selectors}\n</residue_selectors>")
    if selector_name:
        parts.append(f"<mover_selector_name>{selector_name}</mover_selector_name>")
    return "\n".join(parts)


def penalty(types, shape, target, radius, boundary, strength, comment=None):
    lines = [f"# {comment}"] if comment else []
    lines += [
        "PENALTY_DEFINITION",
        f"TYPE {types}",
        f"SHAPE {shape}",
        f"TARGET {target}",
        f"RADIUS {radius}",
        f"BOUNDARY {boundary}",
        f"STRENGTH {strength}",
        "END_PENALTY_DEFINITION",
    ]
    return "\n".join(lines)


def rotamer(selectors=None, penalties=(), restrictions=()):
    parts = ["<name>rotamer_change</name>"]
    if selectors:
        parts.append(f"<residue_selectors>\n{selectors}\n</residue_selectors>")
    if penalties:
        items = []
        for comp, sel in penalties:
            item = f"<item>\n<comp>\n{comp}\n</comp>"
            if sel:
                item += f"\n<comp_selector_name>{sel}</comp_selector_name>"
            items.append(item + "\n</item>")
        parts.append("<penalties>\n" + "\n".join(items) + "\n</penalties>")
    if restrictions:
        items = [
            f"<item>\n<type>{kind}</type>\n<residues>{res}</residues>\n<selector_name>{sel}</selector_name>\n</item>"
            for kind, res, sel in restrictions
        ]
        parts.append("<residue_restrictions>\n" + "\n".join(items) + "\n</residue_restrictions>")
    return "\n".join(parts)


LAYERS = "\n".join(
    [
        '<Layer name="core" select_core="true" select_boundary="false" select_surface="false"/>',
        '<Layer name="boundary" select_core="false" select_boundary="true" select_surface="false"/>',
        '<Layer name="surface" select_core="false" select_boundary="false" select_surface="true"/>',
    ]
)

LAYER_RESTRICTIONS = [
    ("restrict", "A,V,L,I,M,F,W,Y", "core"),
    ("restrict", "A,V,L,I,M,F,W,Y,S,T,N,Q,H", "boundary"),
    ("restrict", "A,D,E,K,R,H,N,Q,S,T,Y", "surface"),
]


def ss_selectors(bad):
    ss = 'helix="true" strand="true" turn="false"' if bad else 'ss="HE"'
    return "\n".join(
        [
            '<Layer name="core_selector" select_core="true" select_boundary="false" select_surface="false"/>',
            '<Layer name="surface_selector" select_core="false" select_boundary="false" select_surface="true"/>',
            f'<SecondaryStructure name="structured_regions" {ss}/>',
            '<Neighborhood name="gly_outlier_neighbors" resnums="14" distance="8.0"/>',
        ]
    )


def ss_rotamer(bad):
    return rotamer(
        selectors=ss_selectors(bad),
        penalties=[
            (penalty("S,T,N,Q,D,E,H,Y", "BELOW", "0.1", "0", "LINEAR", 20, "Encourage polar residues in the core to satisfy H-bonds"), "core_selector"),
            (penalty("G", "ABOVE", "2", "0", "LINEAR", 10, "Limit glycine overall"), None),
        ],
        restrictions=[
            ("prohibit", "G", "structured_regions"),
            ("prohibit", "G,P", "gly_outlier_neighbors"),
        ],
    )


def build():
    r = []
    # 1. Layer-aware repack with composition penalties.
    r.append(choose("rotamer_change", "The starting sequence is poly-alanine. I will first assign layer-appropriate residues."))
    r.append(
        run(
            rotamer(
                selectors=LAYERS + '\n<Or name="all_res" selectors="core,boundary,surface"/>',
                penalties=[
                    (penalty("P", "ABOVE", "0", "0", "QUADRATIC", 100), None),
                    (penalty("D,E,K,R,H,N,Q,S,T", "ABOVE", "0", "0", "LINEAR", 50), "core"),
                    (penalty("D,E,K,R,H,N,Q,S,T,Y", "BELOW", "0.6", "0", "LINEAR", 30), "surface"),
                ],
                restrictions=[("prohibit", "P", "all_res")] + LAYER_RESTRICTIONS,
            ),
            "Hydrophobic core, polar surface, no prolines.",
        )
    )
    # 2. Backbone move with invalid Backrub attributes, repaired to Small.
    r.append(choose("backbone_change", "The backbone may be strained; a gentle perturbation should help."))
    r.append(run(backbone("backrub", 'nmoves="100" temperature="0.6"'), "Sample the backbone with backrub."))
    r.append(
        run(
            backbone("small", 'angle_max="7.0" nmoves="10"'),
            "Backrub does not take nmoves or temperature. I will use the Small mover with valid parameters instead.",
        )
    )
    # 3. Selector with invalid SecondaryStructure attributes, repaired to ss="HE".
    r.append(choose("rotamer_change", "Glycine in helices and strands destabilizes the fold. I will restrict it."))
    r.append(run(ss_rotamer(bad=True), "Prohibit glycine in structured regions."))
    r.append(
        run(
            ss_rotamer(bad=False),
            "SecondaryStructure selects with the ss attribute. I will use ss=\"HE\" to keep the same intent.",
        )
    )
    # 4. Plain repack.
    r.append(choose("rotamer_change", "Repack to relax side chains after the restriction."))
    r.append(run(rotamer(), "Default repack."))
    # 5. Backrub with valid parameters.
    r.append(choose("backbone_change", "Try a backrub move now that the sequence is settled."))
    r.append(run(backbone("backrub", 'pivot_atoms="CA"'), "Backrub with CA pivots."))
    # 6. Undo the last two steps.
    r.append(choose("go_back_to_step", "Energies got worse after the last two steps. I will return to step 3."))
    r.append(run("<name>go_back_to_step</name>\n<step>3</step>", "Revert to step 3."))
    # 7. Count-based glycine limit.
    r.append(choose("rotamer_change", "From step 3, cap glycine by count."))
    r.append(
        run(
            rotamer(
                selectors=LAYERS,
                penalties=[(penalty("G", "ABOVE", "1", "0", "LINEAR", 10), None)],
                restrictions=LAYER_RESTRICTIONS,
            ),
            "No more than one glycine.",
        )
    )
    # 8. Shear on the core.
    r.append(choose("backbone_change", "Shear moves on the core may improve packing."))
    r.append(
        run(
            backbone("shear", 'angle_max="5.0" nmoves="5"', '<Layer name="core" select_core="true" select_boundary="false" select_surface="false"/>', "core"),
            "Shear restricted to the core layer.",
        )
    )
    # 9. Surface charge window.
    r.append(choose("rotamer_change", "Keep the surface charged but not excessively."))
    r.append(
        run(
            rotamer(
                selectors=LAYERS,
                penalties=[(penalty("D,E,K,R", "OUTSIDE", "0.4", "0.1", "QUADRATIC", 40), "surface")],
                restrictions=LAYER_RESTRICTIONS,
            ),
            "Charged fraction between 0.3 and 0.5 on the surface.",
        )
    )
    # 10. Small mover on the whole chain.
    r.append(choose("backbone_change", "A small global perturbation."))
    r.append(run(backbone("small", 'angle_max="3.0" nmoves="20"'), "Small mover, three degrees."))
    # 11. Aromatic core.
    r.append(choose("rotamer_change", "The core lacks aromatics."))
    r.append(
        run(
            rotamer(
                selectors=LAYERS,
                penalties=[(penalty("F,W,Y", "BELOW", "2", "0", "LINEAR", 15), "core")],
                restrictions=LAYER_RESTRICTIONS,
            ),
            "At least two aromatics in the core.",
        )
    )
    # 12. Repack.
    r.append(choose("rotamer_change", "Repack once more."))
    r.append(run(rotamer(), "Default repack."))
    # 13. Backrub on one helix.
    r.append(choose("backbone_change", "Relax the second helix."))
    r.append(
        run(
            backbone("backrub", 'pivot_atoms="CA"', '<Index name="helix2" resnums="17-24"/>', "helix2"),
            "Backrub on residues 17 to 24.",
        )
    )
    # 14. Final polish.
    r.append(choose("rotamer_change", "Final layer-aware repack."))
    r.append(
        run(
            rotamer(selectors=LAYERS, restrictions=LAYER_RESTRICTIONS),
            "Layer restrictions only.",
        )
    )
    assert len(r) == 30, len(r)
    return {"responses": [{"text": t} for t in r]}


if __name__ == "__main__":
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(build(), indent=2) + "\n")
    print(f"wrote {OUT}")
