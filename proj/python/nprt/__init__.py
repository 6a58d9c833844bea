"""Neural precomputed radiance transfer: baking, training, shader export and rendering."""

from ._core import (
    DataError,
    Dataset,
    InputError,
    Model,
    TripleProductTensor,
    bake,
    cli,
    compare,
    load_dataset,
    load_model,
    load_tau,
    model_from_json,
    read_image,
    sh_basis,
    sh_count,
    train,
    triple_product_tensor,
    write_pfm,
)

__all__ = [
    "DataError",
    "Dataset",
    "InputError",
    "Model",
    "TripleProductTensor",
    "bake",
    "cli",
    "compare",
    "load_dataset",
    "load_model",
    "load_tau",
    "model_from_json",
    "read_image",
    "sh_basis",
    "sh_count",
    "train",
    "triple_product_tensor",
    "write_pfm",
]
