from .network import (
    ModelSettings,
    SequenceOutputs,
    build_model_params,
    encode_backbone,
    fm_mlp_slots,
    forward_sequence,
    position_ramp,
    set_encode,
    slot_attention,
    slot_init_values,
    transition,
)

__all__ = [
    "ModelSettings",
    "SequenceOutputs",
    "build_model_params",
    "encode_backbone",
    "fm_mlp_slots",
    "forward_sequence",
    "position_ramp",
    "set_encode",
    "slot_attention",
    "slot_init_values",
    "transition",
]
