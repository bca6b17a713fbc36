"""Pinhole projection: which objects land where in each camera view, which
of them count as key objects, and where their name labels would be anchored.

Run: python demos/02_projection_views.py
"""

from scenedesc.descriptions import scene_display_names
from scenedesc.projection import KeyObjectPolicy, label_anchor, project_object, select_key_objects
from scenedesc.toy import toy_scene

scene = toy_scene()
names = scene_display_names(scene)
policy = KeyObjectPolicy()  # central 50% of the image, at least 50 visible points

for view in scene.views:
    results = [project_object(view, obj) for obj in scene.objects]
    keys = select_key_objects(view, results, policy)
    print(f"\n{view.view_id} ({view.width}x{view.height}):")
    for result in results:
        name = names[result.object_index]
        if not result.visible:
            print(f"  {name:<9} not visible")
            continue
        u, v = result.center_px
        marker = "KEY" if result.object_index in keys else "   "
        print(
            f"  {name:<9} {marker} center ({u:6.1f}, {v:6.1f})"
            f"  visible {result.visible_point_count:3d}/{216}"
            f"  depth {result.mean_depth:.2f} m"
        )
    # label overlays go at the projected centers, clamped 2 px inside the frame
    anchors = {names[r.object_index]: label_anchor(view, r) for r in results if r.visible}
    sample = list(anchors.items())[:2]
    print("  label anchors (first two):", [(n, (round(u), round(v))) for n, (u, v) in sample])
