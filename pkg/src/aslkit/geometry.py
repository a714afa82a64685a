"""Room / microphone-array geometry and propagation-delay arithmetic.

Positions are plain numpy arrays of shape (3,), in meters. Two coordinate
frames are used throughout:

* the *room frame*: origin at a room corner at floor level, axes along the
  walls -- all positions stored in :class:`ArrayGeometry` live here;
* the *array frame*: origin at the midpoint between the two ring centers of
  the meeting-room table array, useful because annotation files are often
  referenced to it.

A :class:`RigidTransform` (yaw about z + translation) maps array-frame
coordinates into the room frame and is kept on the geometry so ingestion
code can convert annotations either way.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_SOUND = 343.0  # m/s in air at 20 C
DEFAULT_SAMPLE_RATE = 16000.0

# IDIAP smart meeting room constants
IDIAP_ROOM = (3.6, 8.2, 2.4)
IDIAP_RING_RADIUS = 0.1
IDIAP_RING_SEPARATION = 0.8
IDIAP_MICS_PER_RING = 8
# Where the array-frame origin sits in the room frame by default. x/y put the
# table at the room center; z is the table-top height, which the corpus does
# not document -- override through the transform if annotations disagree.
IDIAP_DEFAULT_ARRAY_ORIGIN = (1.8, 4.1, 0.72)


def as_position(p) -> np.ndarray:
    """Coerce to a finite (3,) float vector."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"position must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"position must be finite, got {arr}")
    return arr


def euclidean_distance(a, b) -> float:
    """Distance in meters between two positions."""
    return float(np.linalg.norm(as_position(a) - as_position(b)))


@dataclass(frozen=True)
class RigidTransform:
    """Array frame -> room frame: rotate by ``yaw_deg`` about z, then translate."""

    translation: tuple = (0.0, 0.0, 0.0)
    yaw_deg: float = 0.0

    def rotation_matrix(self) -> np.ndarray:
        yaw = math.radians(self.yaw_deg)
        c, s = math.cos(yaw), math.sin(yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_room(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return p @ self.rotation_matrix().T + np.asarray(self.translation)

    def to_array(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return (p - np.asarray(self.translation)) @ self.rotation_matrix()


@dataclass(frozen=True)
class SourceBox:
    """Axis-aligned region (room frame) from which source positions are drawn."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", as_position(self.lo))
        object.__setattr__(self, "hi", as_position(self.hi))
        if np.any(self.lo > self.hi):
            raise ValueError(f"box lo {self.lo} exceeds hi {self.hi}")
        self.lo.flags.writeable = False
        self.hi.flags.writeable = False

    def contains(self, p, atol: float = 1e-9) -> bool:
        p = as_position(p)
        return bool(np.all(p >= self.lo - atol) and np.all(p <= self.hi + atol))

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo


def idiap_source_box() -> SourceBox:
    """Uniform sampling region for the speaker's mouth in the IDIAP room."""
    return SourceBox(lo=(0.0, 0.0, 0.92), hi=(3.6, 8.2, 1.53))


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions plus the constants shared by simulation and SRP.

    Immutable after construction; safe to share across parallel workers.

    mics            (M, 3) positions, room frame, meters
    mic_labels      original 1-based microphone numbers (subset selection
                    preserves them)
    room_min/max    axis-aligned room bounds, room frame
    """

    mics: np.ndarray
    room_min: np.ndarray
    room_max: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND
    sample_rate: float = DEFAULT_SAMPLE_RATE
    mic_labels: tuple = ()
    transform: RigidTransform = field(default_factory=RigidTransform)

    def __post_init__(self):
        mics = np.atleast_2d(np.asarray(self.mics, dtype=np.float64))
        if mics.ndim != 2 or mics.shape[1] != 3:
            raise ValueError(f"mics must have shape (M, 3), got {mics.shape}")
        if mics.shape[0] < 2:
            raise ValueError("need at least 2 microphones")
        if not np.all(np.isfinite(mics)):
            raise ValueError("microphone positions must be finite")
        object.__setattr__(self, "mics", mics)
        object.__setattr__(self, "room_min", as_position(self.room_min))
        object.__setattr__(self, "room_max", as_position(self.room_max))
        if np.any(self.room_min >= self.room_max):
            raise ValueError("room_min must be strictly below room_max componentwise")
        if np.any(mics < self.room_min) or np.any(mics > self.room_max):
            raise ValueError("all microphones must lie inside the room bounds")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        labels = tuple(self.mic_labels) if self.mic_labels else tuple(range(1, mics.shape[0] + 1))
        if len(labels) != mics.shape[0]:
            raise ValueError("mic_labels length must match mic count")
        object.__setattr__(self, "mic_labels", labels)
        for arr in (self.mics, self.room_min, self.room_max):
            arr.flags.writeable = False

    @property
    def num_mics(self) -> int:
        return self.mics.shape[0]

    def mic_index(self, label: int) -> int:
        """Row index of the microphone with the given original number."""
        try:
            return self.mic_labels.index(label)
        except ValueError:
            raise IndexError(f"microphone number {label} not in geometry {self.mic_labels}") from None

    def distances(self, points) -> np.ndarray:
        """Euclidean distances (..., M) from points (..., 3) to every mic."""
        pts = np.asarray(points, dtype=np.float64)
        return np.linalg.norm(pts[..., None, :] - self.mics, axis=-1)

    def room_box(self) -> SourceBox:
        return SourceBox(lo=self.room_min, hi=self.room_max)


def sample_delay(source, mic_index: int, geom: ArrayGeometry) -> float:
    """Arrival delay in samples (fractional) from `source` to one microphone.

    delay = sample_rate * distance / speed_of_sound
    """
    if not 0 <= mic_index < geom.num_mics:
        raise IndexError(f"mic_index {mic_index} out of range for {geom.num_mics} microphones")
    d = euclidean_distance(source, geom.mics[mic_index])
    return geom.sample_rate * d / geom.speed_of_sound


def sample_delays(points, geom: ArrayGeometry) -> np.ndarray:
    """Vectorized :func:`sample_delay`: (..., 3) points -> (..., M) delays."""
    return geom.sample_rate * geom.distances(points) / geom.speed_of_sound


def _idiap_mics_array_frame() -> np.ndarray:
    """All 16 mic positions in the array frame.

    Two rings of 8, radius 0.1 m, centers at y = -/+0.4 m on the table plane
    (z = 0). Within a ring, mic k (0-based) sits at angle k*45 degrees
    counterclockwise from +x; mics 1-8 are the -y ring, 9-16 the +y ring.
    The corpus does not document per-mic angles, so this is a fixed
    convention; only relative geometry affects the pipeline.
    """
    angles = np.arange(IDIAP_MICS_PER_RING) * (2.0 * np.pi / IDIAP_MICS_PER_RING)
    ring = np.stack(
        [IDIAP_RING_RADIUS * np.cos(angles), IDIAP_RING_RADIUS * np.sin(angles), np.zeros_like(angles)],
        axis=1,
    )
    half = IDIAP_RING_SEPARATION / 2.0
    ring_a = ring + np.array([0.0, -half, 0.0])
    ring_b = ring + np.array([0.0, +half, 0.0])
    return np.vstack([ring_a, ring_b])


def build_idiap_geometry(
    subset=None,
    transform: RigidTransform | None = None,
    speed_of_sound: float = SPEED_OF_SOUND,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> ArrayGeometry:
    """Geometry of the IDIAP meeting-room table array, in the room frame.

    subset      iterable of original mic numbers (1-16) to keep, e.g.
                (1, 5, 11, 15) for the two-pair layout; None keeps all 16.
    transform   placement of the array frame inside the room; defaults to
                the room center at table height IDIAP_DEFAULT_ARRAY_ORIGIN.
    """
    if transform is None:
        transform = RigidTransform(translation=IDIAP_DEFAULT_ARRAY_ORIGIN)
    mics_array = _idiap_mics_array_frame()
    if subset is None:
        labels = tuple(range(1, 17))
    else:
        labels = tuple(int(i) for i in subset)
        bad = [i for i in labels if not 1 <= i <= 16]
        if bad:
            raise IndexError(f"microphone numbers out of range 1-16: {bad}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate microphone numbers in subset: {labels}")
    mics_room = transform.to_room(mics_array[[i - 1 for i in labels]])
    return ArrayGeometry(
        mics=mics_room,
        room_min=(0.0, 0.0, 0.0),
        room_max=IDIAP_ROOM,
        speed_of_sound=speed_of_sound,
        sample_rate=sample_rate,
        mic_labels=labels,
        transform=transform,
    )


def load_geometry(path) -> ArrayGeometry:
    """Build an ArrayGeometry from a JSON config file.

    Schema::

        {
          "layout": "idiap16" | "custom",
          "mic_subset": [1, 5, 11, 15],          # idiap16 only, optional
          "mic_positions": [[x,y,z], ...],       # custom only, room frame
          "array": {"origin": [x,y,z], "yaw_deg": 0.0},
          "room": {"min": [0,0,0], "max": [3.6,8.2,2.4]},   # custom only
          "speed_of_sound": 343.0,
          "sample_rate": 16000
        }
    """
    with open(path) as f:
        cfg = json.load(f)
    known = {"layout", "mic_subset", "mic_positions", "array", "room", "speed_of_sound", "sample_rate"}
    unknown = set(cfg) - known
    if unknown:
        raise ValueError(f"unknown geometry config keys: {sorted(unknown)}")
    arr = cfg.get("array", {})
    transform = RigidTransform(
        translation=tuple(arr.get("origin", IDIAP_DEFAULT_ARRAY_ORIGIN)),
        yaw_deg=float(arr.get("yaw_deg", 0.0)),
    )
    c = float(cfg.get("speed_of_sound", SPEED_OF_SOUND))
    fs = float(cfg.get("sample_rate", DEFAULT_SAMPLE_RATE))
    layout = cfg.get("layout", "idiap16")
    if layout == "idiap16":
        return build_idiap_geometry(
            subset=cfg.get("mic_subset"),
            transform=transform,
            speed_of_sound=c,
            sample_rate=fs,
        )
    if layout == "custom":
        room = cfg["room"]
        return ArrayGeometry(
            mics=np.asarray(cfg["mic_positions"], dtype=np.float64),
            room_min=room["min"],
            room_max=room["max"],
            speed_of_sound=c,
            sample_rate=fs,
            transform=transform,
        )
    raise ValueError(f"unknown geometry layout {layout!r}")
