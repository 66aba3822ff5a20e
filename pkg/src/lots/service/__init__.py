from .app import ENV_CKPT, ENV_DATA_DIR, ENV_PORT, create_app
from .schemas import AnnotationSession, GenerationRequest, GenerationResponse
from .state import AnnotationStore, GenerationQueue, TaskPool, export_wild_entries

__all__ = [
    "create_app",
    "ENV_CKPT",
    "ENV_DATA_DIR",
    "ENV_PORT",
    "AnnotationSession",
    "GenerationRequest",
    "GenerationResponse",
    "AnnotationStore",
    "GenerationQueue",
    "TaskPool",
    "export_wild_entries",
]
