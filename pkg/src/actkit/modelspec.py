"""Declarative staged-CNN descriptions with named, surgically replaceable activation sites.

A ModelSpec is an immutable value: four stages of residual blocks behind a stem conv,
every nonlinearity addressable as "stem.act" or "stage{K}.block{J}.act_a/act_b".
Activation surgery rewrites kinds at selected sites and returns a new spec; building
a model from a spec allocates parameters in a fixed order so the initial weights are
a function of the seed alone, never of the activation kinds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .kernels import ActivationKind, activate_batch, activate_batch_backward
from .tensor import (
    Rng,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    global_avg_pool,
    global_avg_pool_backward,
    he_init,
    softmax_cross_entropy,
)

BAND_A = "A"
BAND_B = "B"

# Full-scale stage layout for the staged video model this mirrors; the presets
# default to one block per stage for desk-scale runs.
FULL_SCALE_BLOCKS = (3, 5, 11, 7)


@dataclass(frozen=True)
class ActivationSite:
    """One named nonlinearity: its id, current kind, and band (A/B inside blocks, None for the stem)."""

    site_id: str
    kind: ActivationKind
    band: str | None


@dataclass(frozen=True)
class BlockSpec:
    channels: int
    stride: int
    act_a: ActivationKind
    act_b: ActivationKind


@dataclass(frozen=True)
class ModelSpec:
    preset_name: str
    stem_act: ActivationKind
    stages: tuple[tuple[BlockSpec, ...], ...]
    num_classes: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(tuple(stage) for stage in self.stages))
        if len(self.stages) != 4:
            raise ConfigError(f"a model spec has exactly 4 stages, got {len(self.stages)}")
        prev = 0
        for k, stage in enumerate(self.stages, start=1):
            if not stage:
                raise ConfigError(f"stage {k} has no blocks")
            for blk in stage:
                if blk.channels < 1 or blk.stride < 1:
                    raise ConfigError(f"stage {k} block has bad channels/stride: {blk}")
                if blk.channels < prev:
                    raise ConfigError("channel counts must be non-decreasing across blocks")
                prev = blk.channels
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def stem_channels(self) -> int:
        return self.stages[0][0].channels


class GroupSelector:
    """Addresses a set of activation sites: a named layer group, a band, or one site."""

    _SCOPES = ("initial", "middle", "last", "all", "band", "site")

    def __init__(self, scope: str, band: str | None = None, site_id: str | None = None):
        if scope not in self._SCOPES:
            raise ConfigError(f"unknown selector scope {scope!r}")
        if scope == "band" and band not in (BAND_A, BAND_B):
            raise ConfigError(f"band selector needs band 'A' or 'B', got {band!r}")
        if scope == "site" and not site_id:
            raise ConfigError("site selector needs a site id")
        self.scope = scope
        self.band = band
        self.site_id = site_id

    def __repr__(self) -> str:
        return f"GroupSelector({self.as_string()!r})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GroupSelector)
            and (self.scope, self.band, self.site_id) == (other.scope, other.band, other.site_id)
        )

    def __hash__(self) -> int:
        return hash((self.scope, self.band, self.site_id))

    def as_string(self) -> str:
        if self.scope == "band":
            return f"band:{self.band.lower()}"
        if self.scope == "site":
            return f"site:{self.site_id}"
        return self.scope

    @classmethod
    def from_string(cls, text: str) -> "GroupSelector":
        t = text.strip().lower()
        if t in ("initial", "middle", "last", "all"):
            return cls(t)
        if t.startswith("band:"):
            return cls("band", band=t.split(":", 1)[1].strip().upper())
        if text.strip().lower().startswith("site:"):
            return cls("site", site_id=text.strip().split(":", 1)[1].strip())
        raise ConfigError(f"cannot parse selector {text!r}")

    def matches(self, site_id: str, band: str | None, stage: int | None) -> bool:
        """stage is 1-based, None for the stem site."""
        if self.scope == "all":
            return True
        if self.scope == "initial":
            return site_id == "stem.act"
        if self.scope == "middle":
            return stage in (2, 3)
        if self.scope == "last":
            return stage == 4
        if self.scope == "band":
            return band == self.band
        return site_id == self.site_id


INITIAL = GroupSelector("initial")
MIDDLE = GroupSelector("middle")
LAST = GroupSelector("last")
ALL = GroupSelector("all")


def band_selector(band: str) -> GroupSelector:
    return GroupSelector("band", band=band.upper())


def site_selector(site_id: str) -> GroupSelector:
    return GroupSelector("site", site_id=site_id)


def preset(name: str, blocks_per_stage: tuple[int, int, int, int] = (1, 1, 1, 1)) -> ModelSpec:
    """Build a named desk-scale preset.

    mini-resnet: every site ReLU. mini-x3d: same topology, act_a ReLU and act_b Swish.
    Both use stage channels (8, 16, 32, 32) with strides (1, 2, 2, 2); the first block
    of a stage carries the stride. blocks_per_stage widens each stage, e.g. the
    full-scale layout FULL_SCALE_BLOCKS = (3, 5, 11, 7).
    """
    if name == "mini-resnet":
        act_a, act_b = ActivationKind.RELU, ActivationKind.RELU
    elif name == "mini-x3d":
        act_a, act_b = ActivationKind.RELU, ActivationKind.SWISH
    else:
        raise ConfigError(f"unknown preset {name!r} (expected 'mini-resnet' or 'mini-x3d')")
    if len(blocks_per_stage) != 4 or any(b < 1 for b in blocks_per_stage):
        raise ConfigError(f"blocks_per_stage must be 4 positive counts, got {blocks_per_stage}")
    channels = (8, 16, 32, 32)
    strides = (1, 2, 2, 2)
    stages = []
    for ch, st, nblocks in zip(channels, strides, blocks_per_stage):
        stage = [BlockSpec(ch, st if j == 0 else 1, act_a, act_b) for j in range(nblocks)]
        stages.append(tuple(stage))
    return ModelSpec(preset_name=name, stem_act=ActivationKind.RELU, stages=tuple(stages))


def list_sites(spec: ModelSpec) -> list[ActivationSite]:
    """All sites in stable order: stem first, then stages and blocks in index order."""
    sites = [ActivationSite("stem.act", spec.stem_act, None)]
    for k, stage in enumerate(spec.stages, start=1):
        for j, blk in enumerate(stage, start=1):
            sites.append(ActivationSite(f"stage{k}.block{j}.act_a", blk.act_a, BAND_A))
            sites.append(ActivationSite(f"stage{k}.block{j}.act_b", blk.act_b, BAND_B))
    return sites


def replace_activations(
    spec: ModelSpec,
    selector: GroupSelector,
    from_kind: ActivationKind | None,
    to_kind: ActivationKind,
) -> tuple[ModelSpec, int]:
    """Set kind=to_kind at every site the selector matches whose kind equals from_kind
    (from_kind=None matches any). Returns the new spec and the changed-site count;
    a site already at to_kind that matches still counts as changed."""
    if selector.scope == "site":
        known = {s.site_id for s in list_sites(spec)}
        if selector.site_id not in known:
            raise ConfigError(f"no such activation site: {selector.site_id!r}")

    def hit(site_id: str, band: str | None, stage: int | None, kind: ActivationKind) -> bool:
        return selector.matches(site_id, band, stage) and (from_kind is None or kind == from_kind)

    count = 0
    stem_act = spec.stem_act
    if hit("stem.act", None, None, spec.stem_act):
        stem_act = to_kind
        count += 1
    new_stages = []
    for k, stage in enumerate(spec.stages, start=1):
        new_blocks = []
        for j, blk in enumerate(stage, start=1):
            act_a, act_b = blk.act_a, blk.act_b
            if hit(f"stage{k}.block{j}.act_a", BAND_A, k, blk.act_a):
                act_a = to_kind
                count += 1
            if hit(f"stage{k}.block{j}.act_b", BAND_B, k, blk.act_b):
                act_b = to_kind
                count += 1
            new_blocks.append(replace(blk, act_a=act_a, act_b=act_b))
        new_stages.append(tuple(new_blocks))
    return replace(spec, stem_act=stem_act, stages=tuple(new_stages)), count


def to_json(spec: ModelSpec) -> dict:
    """JSON document form: {preset, stem:{act}, stages:[{blocks:[...]}], head:{classes}}."""
    return {
        "preset": spec.preset_name,
        "stem": {"act": spec.stem_act.value},
        "stages": [
            {
                "blocks": [
                    {
                        "channels": blk.channels,
                        "stride": blk.stride,
                        "act_a": blk.act_a.value,
                        "act_b": blk.act_b.value,
                    }
                    for blk in stage
                ]
            }
            for stage in spec.stages
        ],
        "head": {"classes": spec.num_classes},
    }


def from_json(doc: dict) -> ModelSpec:
    """Inverse of to_json. Round-trips bit-exactly."""
    try:
        stages = tuple(
            tuple(
                BlockSpec(
                    channels=int(blk["channels"]),
                    stride=int(blk["stride"]),
                    act_a=ActivationKind.from_name(blk["act_a"]),
                    act_b=ActivationKind.from_name(blk["act_b"]),
                )
                for blk in stage["blocks"]
            )
            for stage in doc["stages"]
        )
        return ModelSpec(
            preset_name=str(doc["preset"]),
            stem_act=ActivationKind.from_name(doc["stem"]["act"]),
            stages=stages,
            num_classes=int(doc["head"]["classes"]),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed model spec document: {exc!r}") from None


def fingerprint(spec: ModelSpec) -> str:
    """Stable hex digest of the serialized spec; changes iff the spec changes."""
    blob = json.dumps(to_json(spec), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class _BlockPlan:
    prefix: str
    stride: int
    act_a: ActivationKind
    act_b: ActivationKind
    has_proj: bool


class Model:
    """Parameter tensors plus the execution plan derived from one ModelSpec.

    Parameters live in an insertion-ordered dict; the allocation order (stem, stages
    in order, head) is independent of activation kinds, so two specs differing only
    in kinds yield bit-identical initial weights for the same seed.
    """

    def __init__(self, spec: ModelSpec, params: dict[str, np.ndarray], plans: list[_BlockPlan]):
        self.spec = spec
        self.params = params
        self._plans = plans

    def param_list(self) -> list[np.ndarray]:
        return list(self.params.values())

    def set_params(self, values: list[np.ndarray]) -> None:
        if len(values) != len(self.params):
            raise ShapeError("parameter count mismatch")
        for name, val in zip(list(self.params), values):
            self.params[name] = val


def build_model(spec: ModelSpec, rng: Rng) -> Model:
    """Allocate He-uniform weights (zero biases) for the spec, in fixed order."""
    params: dict[str, np.ndarray] = {}
    plans: list[_BlockPlan] = []

    def alloc_conv(name: str, out_ch: int, in_ch: int, k: int) -> None:
        params[f"{name}.w"] = he_init((out_ch, in_ch, k, k), fan_in=in_ch * k * k, rng=rng)
        params[f"{name}.b"] = np.zeros(out_ch, dtype=np.float32)

    in_ch = 3
    alloc_conv("stem", spec.stem_channels, in_ch, 3)
    in_ch = spec.stem_channels
    for k, stage in enumerate(spec.stages, start=1):
        for j, blk in enumerate(stage, start=1):
            prefix = f"stage{k}.block{j}"
            alloc_conv(f"{prefix}.conv1", blk.channels, in_ch, 3)
            alloc_conv(f"{prefix}.conv2", blk.channels, blk.channels, 3)
            has_proj = blk.stride != 1 or blk.channels != in_ch
            if has_proj:
                alloc_conv(f"{prefix}.proj", blk.channels, in_ch, 1)
            plans.append(_BlockPlan(prefix, blk.stride, blk.act_a, blk.act_b, has_proj))
            in_ch = blk.channels
    params["head.w"] = he_init((in_ch, spec.num_classes), fan_in=in_ch, rng=rng)
    params["head.b"] = np.zeros(spec.num_classes, dtype=np.float32)
    return Model(spec, params, plans)


def _forward_internal(model: Model, batch: np.ndarray, record: bool):
    p = model.params
    tape = [] if record else None

    z = conv2d_forward(batch, p["stem.w"], p["stem.b"], stride=1)
    cur = activate_batch(model.spec.stem_act, z)
    if record:
        tape.append(("stem", batch, z))

    for plan in model._plans:
        x_in = cur
        z1 = conv2d_forward(x_in, p[f"{plan.prefix}.conv1.w"], p[f"{plan.prefix}.conv1.b"], plan.stride)
        a1 = activate_batch(plan.act_a, z1)
        z2 = conv2d_forward(a1, p[f"{plan.prefix}.conv2.w"], p[f"{plan.prefix}.conv2.b"], stride=1)
        if plan.has_proj:
            skip = conv2d_forward(x_in, p[f"{plan.prefix}.proj.w"], p[f"{plan.prefix}.proj.b"], plan.stride)
        else:
            skip = x_in
        s = z2 + skip
        cur = activate_batch(plan.act_b, s)
        if record:
            tape.append(("block", plan, x_in, z1, a1, s))

    feats = global_avg_pool(cur)
    logits = dense_forward(feats, p["head.w"], p["head.b"])
    if record:
        tape.append(("head", cur.shape, feats))
    return logits, tape


def forward(model: Model, batch: np.ndarray) -> np.ndarray:
    """Run the model on an NCHW batch; returns (N, num_classes) logits. Pure."""
    logits, _ = _forward_internal(model, batch, record=False)
    return logits


def loss_and_gradients(
    model: Model, batch: np.ndarray, labels: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy loss and exact parameter gradients for one batch."""
    logits, tape = _forward_internal(model, batch, record=True)
    loss, g_logits = softmax_cross_entropy(logits, labels)
    p = model.params
    grads: dict[str, np.ndarray] = {}

    _tag, last_shape, feats = tape[-1]
    g_feats, grads["head.w"], grads["head.b"] = dense_backward(feats, p["head.w"], g_logits)
    g_cur = global_avg_pool_backward(g_feats, last_shape[2], last_shape[3])

    for entry in reversed(tape[:-1]):
        if entry[0] == "block":
            _, plan, x_in, z1, a1, s = entry
            gs = activate_batch_backward(plan.act_b, s, g_cur)
            ga1, gw2, gb2 = conv2d_backward(a1, p[f"{plan.prefix}.conv2.w"], gs, stride=1)
            grads[f"{plan.prefix}.conv2.w"] = gw2
            grads[f"{plan.prefix}.conv2.b"] = gb2
            gz1 = activate_batch_backward(plan.act_a, z1, ga1)
            gx, gw1, gb1 = conv2d_backward(x_in, p[f"{plan.prefix}.conv1.w"], gz1, plan.stride)
            grads[f"{plan.prefix}.conv1.w"] = gw1
            grads[f"{plan.prefix}.conv1.b"] = gb1
            if plan.has_proj:
                gx_skip, gwp, gbp = conv2d_backward(x_in, p[f"{plan.prefix}.proj.w"], gs, plan.stride)
                grads[f"{plan.prefix}.proj.w"] = gwp
                grads[f"{plan.prefix}.proj.b"] = gbp
                g_cur = gx + gx_skip
            else:
                g_cur = gx + gs
        else:
            _, batch_in, z = entry
            gz = activate_batch_backward(model.spec.stem_act, z, g_cur)
            _, gw, gb = conv2d_backward(batch_in, p["stem.w"], gz, stride=1)
            grads["stem.w"] = gw
            grads["stem.b"] = gb

    ordered = {name: grads[name] for name in model.params}
    return loss, ordered
