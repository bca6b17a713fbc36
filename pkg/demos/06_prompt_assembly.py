"""Dual-level prompt integration: reference detection, the three rewrite
styles, and how the two integration flags stay independent.

Run: python demos/06_prompt_assembly.py
"""

from scenedesc.backends import MockVlmBackend
from scenedesc.descriptions import describe_scene, scene_name_map
from scenedesc.pipeline import project_scene
from scenedesc.prompting import (
    IntegrationFlags,
    ReferenceStyle,
    assemble_prompt,
    build_scene_vocabulary,
    detect_referenced_objects,
    rewrite_description,
)
from scenedesc.toy import toy_scene

scene = toy_scene()
records = describe_scene(scene, project_scene(scene), MockVlmBackend(scene))
vocabulary = build_scene_vocabulary(scene)
name_map = scene_name_map(scene)

query = "Is the lamp on the table near chair 2?"
print("query:", query)
print("referenced objects:", detect_referenced_objects(query, vocabulary))

# One description, three reference styles.
record = records[7]  # the lamp
print("\noriginal:   ", record.text[:80] + "...")
for style in (ReferenceStyle.NAME_ONLY, ReferenceStyle.NAME_WITH_ID, ReferenceStyle.ID_ONLY):
    rewritten = rewrite_description(record, style, name_map)
    print(f"{style.value:<9}:  {rewritten[:80]}...")

# Prompt injection prepends the rewritten descriptions of referenced objects
# to the user turn; embedding fusion only ever touches token blocks.
bundle = assemble_prompt(scene, records, query, ReferenceStyle.ID_ONLY, IntegrationFlags())
print("\nsystem text:", bundle.system_text[:100] + "...")
print("injected descriptions:", len(bundle.injected_descriptions))
print("user turn starts with:", bundle.user_text[:70] + "...")

plain = assemble_prompt(
    scene, records, query, ReferenceStyle.ID_ONLY, IntegrationFlags(prompt_injection=False)
)
no_fusion = assemble_prompt(
    scene, records, query, ReferenceStyle.ID_ONLY, IntegrationFlags(embedding_fusion=False)
)
print("\nprompt_injection off -> no injected text:", plain.injected_descriptions == ())
print("embedding_fusion off -> full_text unchanged:", no_fusion.full_text == bundle.full_text)
