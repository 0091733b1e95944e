"""
Seeded random substreams.

Each concern draws from its own generator so that changing one of them (for
example the pairing mode, which never touches randomness, or the augmentation
mode) leaves every other draw untouched.
"""

from typing import Dict

import numpy as np
import torch

STREAMS = ("data", "noise", "sigma", "augment", "init", "labels", "evaluation")


class RngStreams:
    """Named `numpy.random.Generator` substreams spawned from one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        children = np.random.SeedSequence(self.seed).spawn(len(STREAMS))
        self._generators: Dict[str, np.random.Generator] = {
            name: np.random.default_rng(child)
            for name, child in zip(STREAMS, children)
        }

    def __getattr__(self, name: str) -> np.random.Generator:
        generators = self.__dict__.get("_generators", {})
        if name in generators:
            return generators[name]
        raise AttributeError(name)

    def derive(self, index: int) -> "RngStreams":
        """An independent set of streams keyed by (seed, index)."""
        state = np.random.SeedSequence([self.seed, index]).generate_state(1)
        return RngStreams(int(state[0]))

    def torch_generator(self) -> torch.Generator:
        """A torch generator seeded from the `init` substream."""
        seed = int(self._generators["init"].integers(0, 2**63 - 1))
        return torch.Generator().manual_seed(seed)

    def describe(self) -> Dict[str, object]:
        """Descriptor stored in checkpoints and run manifests."""
        return {"seed": self.seed, "streams": list(STREAMS)}
