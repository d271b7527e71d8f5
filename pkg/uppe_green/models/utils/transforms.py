"""Composable operators on plane-wave-in-z expansions and mixed-representation fields.

Every operator takes keyword state (``modes``, ``field``) and returns the
updated state, so a :class:`Compose` chain can drop or reorder steps.
"""
import numpy as np

from uppe_green.models.errors import ContractError
from uppe_green.models.projectors import apply_modes, heaviside
from uppe_green.models.spectral_core import PHYSICAL, inverse_transform
from uppe_green.utils.logging import logger


class BaseTransform:
    def __init__(self):
        pass

    def __call__(self, **kwargs):
        raise NotImplementedError('Transform __call__ method must be implemented.')


class Compose(BaseTransform):
    def __init__(self, transforms):
        super().__init__()

        self.transforms = transforms

    def __call__(self, **kwargs):
        state = kwargs
        for name, t in self.transforms.items():
            logger.debug(f"Applying {name}")
            state = t(**state)
        return state

    def without(self, *keys):
        """Same chain with the named steps removed."""
        return Compose({k: v for k, v in self.transforms.items() if k not in keys})


class FrequencySign(BaseTransform):
    """Multiply every mode by sign(omega)."""

    def __call__(self, modes, **kwargs):
        omega = modes.table.grid.freqs("t").reshape(1, 1, -1)
        return {**kwargs, "modes": modes.scaled(np.sign(omega))}


class ProjectModes(BaseTransform):
    def __init__(self, kind):
        super().__init__()
        self.kind = kind

    def __call__(self, modes, **kwargs):
        return {**kwargs, "modes": apply_modes(self.kind, modes)}


class Synthesize(BaseTransform):
    """Evaluate the modes on the z grid."""

    def __call__(self, modes, **kwargs):
        return {**kwargs, "modes": modes, "field": modes.synthesize()}


class ZGate(BaseTransform):
    """Multiply by Theta(z); the z = 0 slice keeps half its value."""

    def __call__(self, field, **kwargs):
        if field.rep[2] != PHYSICAL:
            raise ContractError("ZGate needs a field physical along z")
        gate = heaviside(field.grid.coords("z")).reshape(1, 1, -1, 1)
        return {**kwargs, "field": field.with_data(field.data * gate)}


class ToPhysical(BaseTransform):
    def __call__(self, field, **kwargs):
        spectral = [a for a, r in enumerate(field.rep) if r != PHYSICAL]
        if spectral:
            field = inverse_transform(field, spectral)
        return {**kwargs, "field": field}
