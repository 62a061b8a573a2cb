"""Behavioral simulation of delay-based strong PUFs with non-monotonic quantization."""

from .entropy import (ENROLLMENT, NOISELESS, EntropySource, EnvironmentCondition, InstanceConfig, NoiseModel,
                      read_config, sample_entropy_source, write_config)
from .models import (APUF, NMQ_RO, XOR_APUF, XOR_NMQ_RO, ApufInstance, NmqRoInstance, XorComposition,
                     make_puf)

__version__ = "0.1.0"
