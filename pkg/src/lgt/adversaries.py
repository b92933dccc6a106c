"""Offline instance generators, adaptive adversaries, and instance files.

Offline instances are reproducible functions of their parameters (plus a
seed for the random family).  Adaptive adversaries emit layer updates one
at a time, reacting to the policy's current fractional configuration.

Instance files are UTF-8 JSON::

    {"name": str, "width": int, "seed": int|null,
     "layers": [[[child_id, parent_id], ...], ...]}

The root is implicit (id 0, layer 0); ids are positive integers, strictly
increasing in file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from random import Random

from .configuration import Configuration
from .errors import ContractError, GenerationFailed, InstanceParseError, LgtError
from .tree import LayeredTree, LayerUpdate


@dataclass
class Instance:
    """A fully materialized layered-tree instance."""

    name: str
    width: int
    layers: list[LayerUpdate]
    seed: int | None = None

    @property
    def depth(self) -> int:
        return len(self.layers)

    def replay(self, upto: int | None = None) -> LayeredTree:
        """Build the tree after applying the first ``upto`` layers (default all)."""
        tree = LayeredTree()
        for update in self.layers[: upto if upto is not None else len(self.layers)]:
            tree.apply_layer(update)
        return tree


class _IdAllocator:
    def __init__(self):
        self.next_id = 1

    def take(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid


def gen_star(width: int, depth: int) -> Instance:
    """Star of ``width`` chains from the root; chain i has length depth-width+i.

    Exactly one chain reaches the final layer; the others die one by one
    over the last ``width - 1`` layers.
    """
    if width < 1 or depth < width:
        raise ContractError("gen_star requires width >= 1 and depth >= width")
    ids = _IdAllocator()
    lengths = [depth - width + i for i in range(1, width + 1)]
    tips = [0] * width
    layers = []
    for layer in range(1, depth + 1):
        entries = []
        for chain in range(width):
            if lengths[chain] >= layer:
                child = ids.take()
                entries.append((child, tips[chain]))
                tips[chain] = child
        layers.append(LayerUpdate(entries=tuple(entries)))
    return Instance(name=f"star-w{width}-t{depth}", width=width, layers=layers)


def adaptive_dfs_lengths(width: int, depth: int, exploration_order: list[int]) -> Instance:
    """Star instance whose i-th explored chain has length depth-width+i.

    ``exploration_order`` lists chain indices (0-based) in the order the
    deterministic DFS policy will explore them; with the smallest-id
    tie-break this is simply ``range(width)``.
    """
    if sorted(exploration_order) != list(range(width)):
        raise ContractError("exploration_order must be a permutation of range(width)")
    if depth < width:
        raise ContractError("adaptive_dfs_lengths requires depth >= width")
    lengths = [0] * width
    for pos, chain in enumerate(exploration_order, start=1):
        lengths[chain] = depth - width + pos
    ids = _IdAllocator()
    tips = [0] * width
    layers = []
    for layer in range(1, depth + 1):
        entries = []
        for chain in range(width):
            if lengths[chain] >= layer:
                child = ids.take()
                entries.append((child, tips[chain]))
                tips[chain] = child
        layers.append(LayerUpdate(entries=tuple(entries)))
    return Instance(name=f"dfs-lengths-w{width}-t{depth}", width=width, layers=layers)


def gen_comb(width: int, depth: int, tooth_spacing: int | None = None) -> Instance:
    """A spine of length ``depth`` with dead-end teeth of length ``width``.

    With ``tooth_spacing=None`` (the default) a tooth is attached at every
    spine node where layer occupancy allows, keeping every layer at most
    ``width`` wide; an integer spacing attaches teeth at every k-th spine
    node instead.  Teeth always end strictly before the final layer, so the
    spine is the unique path to depth ``depth``.
    """
    if width < 2 or depth <= 2 * width:
        raise ContractError("gen_comb requires width >= 2 and depth > 2*width")
    occupancy = [1] * (depth + 1)  # spine occupies every layer
    anchors = []
    candidates = (
        range(1, depth - width)
        if tooth_spacing is None
        else range(tooth_spacing, depth - width, tooth_spacing)
    )
    for j in candidates:
        span = range(j + 1, j + width + 1)
        if all(occupancy[i] + 1 <= width for i in span):
            anchors.append(j)
            for i in span:
                occupancy[i] += 1

    ids = _IdAllocator()
    spine_tip = 0
    tooth_tip: dict[int, int] = {}
    layers = []
    for layer in range(1, depth + 1):
        entries = []
        child = ids.take()
        entries.append((child, spine_tip))
        new_spine = child
        for anchor in anchors:
            if anchor < layer <= anchor + width:
                parent = spine_tip if layer == anchor + 1 else tooth_tip[anchor]
                child = ids.take()
                entries.append((child, parent))
                tooth_tip[anchor] = child
        spine_tip = new_spine
        layers.append(LayerUpdate(entries=tuple(entries)))
    tag = "dense" if tooth_spacing is None else str(tooth_spacing)
    return Instance(name=f"comb-w{width}-t{depth}-teeth{tag}", width=max(occupancy), layers=layers)


def gen_alternating(depth: int) -> Instance:
    """Two branches; each layer one branch splits in two and the other's twin dies.

    Width 3.  The split side alternates, so a uniform-on-leaves policy keeps
    shuttling a third of its mass across the root.
    """
    if depth < 2:
        raise ContractError("gen_alternating requires depth >= 2")
    ids = _IdAllocator()
    left, right = ids.take(), ids.take()
    layers = [LayerUpdate(entries=((left, 0), (right, 0)))]
    for layer in range(2, depth + 1):
        entries = []
        if layer % 2 == 1:  # left splits, right merges
            a, b = ids.take(), ids.take()
            entries.append((a, left))
            entries.append((b, left))
            c = ids.take()
            entries.append((c, right))
            left, right = a, c  # the twin b dies next layer
        else:  # right splits, left merges
            c = ids.take()
            entries.append((c, left))
            a, b = ids.take(), ids.take()
            entries.append((a, right))
            entries.append((b, right))
            left, right = c, a
        layers.append(LayerUpdate(entries=tuple(entries)))
    return Instance(name=f"alternating-t{depth}", width=3, layers=layers)


def gen_random(
    width: int,
    depth: int,
    seed: int,
    split_prob: float = 0.3,
    kill_prob: float = 0.1,
    max_retries: int = 50,
) -> Instance:
    """Reproducible random layered tree of at most the given width.

    Each tip independently dies with ``kill_prob`` and splits in two with
    ``split_prob`` (capacity permitting).  Attempts leaving a layer without
    survivors are retried with a derived seed; exhausting the retry budget
    raises :class:`GenerationFailed`.
    """
    if not (0.0 <= split_prob <= 1.0 and 0.0 <= kill_prob <= 1.0):
        raise ContractError("probabilities must lie in [0, 1]")
    if width < 1 or depth < 1:
        raise ContractError("gen_random requires width >= 1 and depth >= 1")
    for attempt in range(max_retries):
        # integer-seeded for bit-identical instances across platforms
        rng = Random(seed * 1000003 + attempt)
        ids = _IdAllocator()
        tips = [0]
        layers = []
        ok = True
        observed = 1
        for _ in range(depth):
            entries = []
            new_tips = []
            for tip in tips:
                r = rng.random()
                if r < kill_prob:
                    n_children = 0
                elif r < kill_prob + split_prob:
                    n_children = 2
                else:
                    n_children = 1
                for _ in range(min(n_children, width - len(new_tips))):
                    child = ids.take()
                    entries.append((child, tip))
                    new_tips.append(child)
            if not new_tips:
                ok = False
                break
            observed = max(observed, len(new_tips))
            tips = new_tips
            layers.append(LayerUpdate(entries=tuple(entries)))
        if ok:
            return Instance(
                name=f"random-w{width}-t{depth}-s{seed}",
                width=observed,
                layers=layers,
                seed=seed,
            )
    raise GenerationFailed(
        f"no surviving instance for width={width} depth={depth} after {max_retries} attempts"
    )


class MaxMassAdversary:
    """Adaptive star adversary: kills the endpoint carrying maximal mass.

    Starts with ``width`` equal chains of length horizon - width + 1; during
    the final layers the endpoint with maximal observed mass receives no
    children (ties broken by smallest id) while every other endpoint
    extends by one.
    """

    kind = "max_mass"

    def __init__(self, width: int, horizon: int):
        if width < 1 or horizon < width:
            raise ContractError("adversary requires horizon >= width >= 1")
        self.width = width
        self.horizon = horizon
        self.name = f"max-mass-w{width}-t{horizon}"
        self._next_id = 1
        self._tips: list[int] = []
        self._layer = 0

    def next_update(self, observed: Configuration) -> LayerUpdate:
        """Produce the next layer, reacting to the policy's configuration."""
        if self._layer >= self.horizon:
            raise ContractError("adversary called past its horizon")
        nxt = self._layer + 1
        if nxt == 1:
            parents = [0] * self.width
        elif nxt <= self.horizon - self.width + 1:
            parents = list(self._tips)
        else:
            victim = min(self._tips, key=lambda u: (-observed.mass.get(u, 0.0), u))
            parents = [u for u in self._tips if u != victim]
        entries = []
        new_tips = []
        for p in parents:
            child = self._next_id
            self._next_id += 1
            entries.append((child, p))
            new_tips.append(child)
        self._tips = new_tips
        self._layer = nxt
        return LayerUpdate(entries=tuple(entries))


def save_instance(instance: Instance, path: str):
    payload = {
        "name": instance.name,
        "width": instance.width,
        "seed": instance.seed,
        "layers": [[[c, p] for c, p in update.entries] for update in instance.layers],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(path: str) -> Instance:
    """Parse and fully validate an instance file.

    The file is replayed through a :class:`LayeredTree`, so structural
    violations (wrong-layer parents, reused ids, dead parents) are reported
    with the offending layer index.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise InstanceParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    for key, kinds in (("name", str), ("width", int), ("layers", list)):
        if key not in payload:
            raise InstanceParseError(f"{path}: missing field {key!r}")
        if not isinstance(payload[key], kinds):
            raise InstanceParseError(f"{path}: field {key!r} has wrong type")
    seed = payload.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise InstanceParseError(f"{path}: field 'seed' must be an integer or null")

    layers = []
    last_id = 0
    for i, raw in enumerate(payload["layers"]):
        if not isinstance(raw, list) or not raw:
            raise InstanceParseError(f"{path}: layers[{i}] must be a non-empty list")
        entries = []
        for j, pair in enumerate(raw):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(v, int) for v in pair)
            ):
                raise InstanceParseError(f"{path}: layers[{i}][{j}] must be [child, parent]")
            child, parent = pair
            if child <= last_id:
                raise InstanceParseError(
                    f"{path}: layers[{i}][{j}]: id {child} not strictly increasing"
                )
            last_id = child
            entries.append((child, parent))
        layers.append(LayerUpdate(entries=tuple(entries)))

    instance = Instance(name=payload["name"], width=payload["width"], layers=layers, seed=seed)
    tree = LayeredTree()
    for i, update in enumerate(instance.layers):
        try:
            tree.apply_layer(update)
        except LgtError as e:
            raise InstanceParseError(f"{path}: layers[{i}]: {e}") from e
    if tree.max_layer_size != instance.width:
        raise InstanceParseError(
            f"{path}: declared width {instance.width} but observed {tree.max_layer_size}"
        )
    return instance
