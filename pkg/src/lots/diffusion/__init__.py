from .model import LotsModel, ModelConfig
from .sample import SamplerConfig, sample
from .schedule import NoiseSchedule, add_noise
from .train import TrainConfig, conditioning_dropout, train, training_step
from .unet import AttnSite, Denoiser, DenoiserConfig, attach_adapters, build_denoiser

__all__ = [
    "LotsModel",
    "ModelConfig",
    "SamplerConfig",
    "sample",
    "NoiseSchedule",
    "add_noise",
    "TrainConfig",
    "conditioning_dropout",
    "train",
    "training_step",
    "AttnSite",
    "Denoiser",
    "DenoiserConfig",
    "attach_adapters",
    "build_denoiser",
]
