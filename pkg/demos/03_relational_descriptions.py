"""Relational description generation: plan one describer request per key
object across views (deduplicated), run the deterministic geometric mock,
and report coverage.

Run: python demos/03_relational_descriptions.py
"""

from scenedesc.backends import MockVlmBackend
from scenedesc.descriptions import (
    coverage_report,
    describe_scene,
    plan_description_requests,
)
from scenedesc.pipeline import project_scene
from scenedesc.toy import toy_scene

scene = toy_scene()
projections = project_scene(scene)

# Planning walks views in order; an object already described in an earlier
# view is skipped, so each object gets at most one request.
plan = plan_description_requests(scene, projections)
print("request plan (view, key object):")
for request in plan:
    print(f"  {request.view_id:<11} key={request.key_object_index}"
          f"  sees {len(request.visible_object_indices)} objects")

print("\ndescriber prompt for the first request:")
print(" ", plan[0].prompt_text)

# The mock backend turns centroid geometry into sentences; a real
# vision-language endpoint plugs in behind the same protocol.
records = describe_scene(scene, projections, MockVlmBackend(scene))
print("\ngenerated descriptions:")
for index in sorted(records):
    record = records[index]
    print(f"  [{index}] ({record.status.value} @ {record.source_view})")
    print(f"      {record.text[:96]}{'...' if len(record.text) > 96 else ''}")

report = coverage_report(scene, records)
print("\ncoverage:", f"{len(report.generated)} generated,",
      f"{len(report.fallback)} fallback,", f"{len(report.missing)} missing")
