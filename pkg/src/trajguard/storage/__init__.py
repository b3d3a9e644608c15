"""Binary containers, checkpoint sets and canonical JSON"""

from trajguard.storage.checkpoints import (
    CheckpointMeta,
    CheckpointSet,
    checkpoint_path,
    load_checkpoint,
    save_checkpoint,
)
from trajguard.storage.container import (
    Container,
    decode_container,
    encode_container,
    read_container,
    write_container,
)
from trajguard.storage.serialization import CanonicalJSON

__all__ = [
    "CanonicalJSON",
    "CheckpointMeta",
    "CheckpointSet",
    "Container",
    "checkpoint_path",
    "decode_container",
    "encode_container",
    "load_checkpoint",
    "read_container",
    "save_checkpoint",
    "write_container",
]
