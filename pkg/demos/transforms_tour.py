"""Tour of the result transforms: contact vectors, shape coefficients, poses.

Each transform turns a raw tool output into something a language model can
read: contact bits become a part-level sentence, shape coefficients become
measurements (with implausible values flagged for repair), and poses become
deterministic placeholder image ids.
"""

from toolchat.integration import (
    MeasurementSet,
    ShapeMeasurementModel,
    default_shape_model,
    default_vertex_part_map,
    render_measurement_sentence,
    render_pose_placeholder,
    transform_contact,
    transform_shape,
)

vmap = default_vertex_part_map(24)
contact = [0] * 24
contact[0] = 1   # vertex assigned to "right hand"
contact[8] = 1   # vertex assigned to "right foot"
print("contact bits ->", transform_contact(contact, vmap))
print("no contact   ->", transform_contact([0] * 24, vmap))

model = default_shape_model()
result = transform_shape([0.0] * 10, model)
print("\nzero shape   ->", result.sentence)
result = transform_shape([2.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], model)
print("some shape   ->", result.sentence, "flags:", result.flags)

bad_model = ShapeMeasurementModel(
    rows=tuple((0.0,) * 10 for _ in range(5)),
    offset=(4.2, 70.0, 0.9, 0.8, 0.95),  # 4.2 m tall: implausible
)
flagged = transform_shape([0.0] * 10, bad_model)
print("flagged      ->", flagged.sentence, "flags:", flagged.flags)

print("\npose id      ->", render_pose_placeholder([0.0] * 72))
print("other pose   ->", render_pose_placeholder([0.1] * 72))

ms = MeasurementSet(height=1.83, weight=76.0)
print("partial set  ->", render_measurement_sentence(ms))
