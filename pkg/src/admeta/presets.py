"""Named hyperparameter bundles (the published tuned settings).

Image-classification presets follow the from-scratch recipe: weight decay
1e-4, epsilon 1e-9, k = 6, dynamic eta targeting 0.8. The finetune preset
uses the gentler schedule targeting 0.5 with epsilon 1e-8 and no decay.
Learning-rate decay (milestones) is a per-run choice and is left to the
--lr-schedule flag because milestone positions are step counts, not epochs.
"""
from __future__ import annotations

from dataclasses import replace

from .core import HyperParams
from .lookahead import EtaSchedule

_CIFAR = dict(epsilon=1e-9, k=6, weight_decay=1e-4)


def _hp(**kw) -> HyperParams:
    eta = kw.pop("eta", "dyn08")
    return HyperParams(eta=EtaSchedule.parse(eta), **kw)


# name -> (optimizer kind, HyperParams)
PRESETS: dict[str, tuple[str, HyperParams]] = {
    # SGD family, CIFAR from-scratch
    "sgd-cifar10-resnet": ("sgd", _hp(alpha=0.1, **_CIFAR)),
    "sgdm-cifar10-resnet": ("sgdm", _hp(alpha=0.1, beta=0.9, nesterov=True, **_CIFAR)),
    "admetas-cifar10-resnet": ("admetas", _hp(alpha=0.05, beta=0.2, lam=0.9, **_CIFAR)),
    "admetas-cifar100-resnet": ("admetas", _hp(alpha=0.05, beta=0.1, lam=0.9, **_CIFAR)),
    "admetas-cifar10-pyramidnet": ("admetas", _hp(alpha=0.05, beta=0.4, lam=0.9, **_CIFAR)),
    "admetas-cifar100-pyramidnet": ("admetas", _hp(alpha=0.05, beta=0.1, lam=0.9, **_CIFAR)),
    # Adam family, CIFAR from-scratch
    "adam-cifar10-resnet": ("adam", _hp(alpha=0.001, beta1=0.9, beta2=0.999, **_CIFAR)),
    "radam-cifar10-resnet": ("radam", _hp(alpha=0.01, beta1=0.9, beta2=0.999, **_CIFAR)),
    "admetar-cifar10-resnet": ("admetar", _hp(alpha=0.05, lam=0.1, beta1=0.9, beta2=0.999, **_CIFAR)),
    "admetar-cifar100-resnet": ("admetar", _hp(alpha=0.05, lam=0.05, beta1=0.9, beta2=0.999, **_CIFAR)),
    "admetar-cifar10-pyramidnet": ("admetar", _hp(alpha=0.01, lam=0.1, beta1=0.9, beta2=0.999, **_CIFAR)),
    "admetar-cifar100-pyramidnet": ("admetar", _hp(alpha=0.01, lam=0.1, beta1=0.9, beta2=0.999, **_CIFAR)),
    # finetune-style (language-model tasks): small lr, small lambda, eta -> 0.5
    "admetar-finetune": ("admetar", _hp(alpha=1.5e-4, lam=0.08, beta1=0.9, beta2=0.999,
                                        epsilon=1e-8, k=6, eta="dyn05")),
}


def get_preset(name: str) -> tuple[str, HyperParams]:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {known}") from None


def apply_overrides(hp: HyperParams, **overrides) -> HyperParams:
    """Return hp with any non-None overrides replaced."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(hp, **changes) if changes else hp
