"""Synthetic road-corridor rendering with exact bicycle-model labels.

A camera rides a track of constant-curvature segments over a flat,
texture-noised ground plane.  Each frame perspective-projects a two-lane
road (edge lines, dashed center line, horizon, sky gradient) bent by
the current curvature; the steering label is the closed-form
``atan(wheelbase * curvature)`` and the speed label follows the
per-segment profile.  Everything is a pure function of the track spec,
so regeneration is byte-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..imaging import Frame, write_ppm

WHEELBASE_M = 2.85
LANE_HALF_WIDTH_M = 3.7
LINE_HALF_WIDTH_M = 0.18
DASH_PERIOD_M = 6.0
DASH_ON_M = 3.0
FAR_CLIP_M = 60.0

GRASS = np.array([0.13, 0.33, 0.12])
ASPHALT = np.array([0.40, 0.40, 0.43])
LINE = np.array([0.93, 0.93, 0.90])
SKY_TOP = np.array([0.42, 0.60, 0.88])
SKY_HORIZON = np.array([0.78, 0.84, 0.94])


@dataclass
class TrackSpec:
    """Piecewise-constant-curvature track plus camera and image geometry."""

    segments: list[tuple[float, float]] = field(default_factory=lambda: [(0.0, 200.0)])
    speeds: list[float] | float = 8.0
    cam_height: float = 1.5
    fov_deg: float = 60.0
    image_h: int = 64
    image_w: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.segments:
            raise ContractError("track needs at least one segment")
        for curvature, length in self.segments:
            if length <= 0:
                raise ContractError(f"segment length must be > 0, got {length}")
            if abs(curvature) * WHEELBASE_M > 1.0:
                raise ContractError(f"curvature {curvature} outside the steering range")
        if isinstance(self.speeds, (int, float)):
            self.speeds = [float(self.speeds)] * len(self.segments)
        if len(self.speeds) != len(self.segments):
            raise ContractError(f"{len(self.speeds)} speeds for {len(self.segments)} segments")
        if any(v <= 0 for v in self.speeds):
            raise ContractError("speeds must be positive")
        if self.image_h < 16 or self.image_w < 16:
            raise ContractError(f"image size too small: {self.image_h}x{self.image_w}")

    def total_length(self) -> float:
        return sum(length for _, length in self.segments)

    def at(self, s: float) -> tuple[float, float]:
        """(curvature, speed) of the segment containing arc position s (wrapped)."""
        s = s % self.total_length()
        for (curvature, length), speed in zip(self.segments, self.speeds):
            if s < length:
                return curvature, speed
            s -= length
        return self.segments[-1][0], self.speeds[-1]


def _value_noise(xi: np.ndarray, yi: np.ndarray, seed: int) -> np.ndarray:
    """Bilinear value noise in [0,1) anchored to world coordinates."""

    def lattice(ix, iy):
        h = (ix.astype(np.int64) * 374761393 + iy.astype(np.int64) * 668265263
             + np.int64(seed) * 2246822519) & 0xFFFFFFFF
        h = ((h ^ (h >> 13)) * 1274126177) & 0xFFFFFFFF
        h ^= h >> 16
        return h / float(2 ** 32)

    x0 = np.floor(xi)
    y0 = np.floor(yi)
    fx = xi - x0
    fy = yi - y0
    fx = fx * fx * (3.0 - 2.0 * fx)
    fy = fy * fy * (3.0 - 2.0 * fy)
    v00 = lattice(x0, y0)
    v10 = lattice(x0 + 1, y0)
    v01 = lattice(x0, y0 + 1)
    v11 = lattice(x0 + 1, y0 + 1)
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy


def render_frame(track: TrackSpec, s_pos: float, curvature: float) -> Frame:
    """Project the road ahead of arc position ``s_pos`` bent by ``curvature``."""
    h, w = track.image_h, track.image_w
    focal = (w / 2.0) / np.tan(np.deg2rad(track.fov_deg) / 2.0)
    cy, cx = h / 2.0, w / 2.0
    pixels = np.empty((h, w, 3))

    ys = np.arange(h, dtype=np.float64)
    sky_rows = ys <= cy
    t_sky = np.clip(ys / max(cy, 1.0), 0.0, 1.0)[:, None]
    sky = SKY_TOP[None, :] * (1 - t_sky) + SKY_HORIZON[None, :] * t_sky
    pixels[:] = sky[:, None, :]

    ground_rows = np.where(~sky_rows)[0]
    if ground_rows.size:
        yg = ground_rows.astype(np.float64)
        depth = track.cam_height * focal / (yg - cy)  # meters ahead per row
        depth = np.minimum(depth, FAR_CLIP_M)
        xs = (np.arange(w, dtype=np.float64) - cx)[None, :]
        Z = depth[:, None]
        X = xs * Z / focal
        road_center = 0.5 * curvature * Z * Z
        d = X - road_center

        longi = s_pos + Z
        noise = _value_noise(longi / 0.8, d / 0.8, track.seed) - 0.5

        on_road = np.abs(d) <= LANE_HALF_WIDTH_M
        edge_line = np.abs(np.abs(d) - LANE_HALF_WIDTH_M) <= LINE_HALF_WIDTH_M
        dash_on = (longi % DASH_PERIOD_M) < DASH_ON_M
        center_line = (np.abs(d) <= LINE_HALF_WIDTH_M * 0.8) & dash_on

        ground = np.where(on_road[..., None], ASPHALT, GRASS)
        ground = ground + noise[..., None] * 0.10
        ground = np.where((edge_line | center_line)[..., None], LINE, ground)

        fade = (1.0 / (1.0 + 0.02 * Z))[..., None]
        haze = SKY_HORIZON[None, None, :]
        pixels[ground_rows] = ground * fade + haze * (1 - fade)

    return Frame(np.clip(pixels, 0.0, 1.0))


def generate_synthetic(track: TrackSpec, n_frames: int, out_dir: str | os.PathLike,
                       fps: float = 20.0) -> str:
    """Render ``n_frames`` PPM frames plus the index CSV; returns the CSV path.

    Labels: angle = atan(wheelbase * curvature) of the active segment,
    speed from the profile.  The track wraps if the camera runs past the
    end.  Deterministic for a given spec.
    """
    if n_frames < 2:
        raise ContractError(f"need at least 2 frames, got {n_frames}")
    os.makedirs(out_dir, exist_ok=True)
    dt = 1.0 / fps
    s = 0.0
    lines = ["timestamp,camera,filename,angle,torque,speed"]
    for i in range(n_frames):
        curvature, speed = track.at(s)
        frame = render_frame(track, s, curvature)
        name = f"frame_{i:06d}.ppm"
        write_ppm(frame, os.path.join(out_dir, name))
        angle = float(np.arctan(WHEELBASE_M * curvature))
        timestamp = int(round(i * dt * 1e9))
        lines.append(f"{timestamp},center,{name},{angle!r},0.0,{speed!r}")
        s += speed * dt
    csv_path = os.path.join(out_dir, "index.csv")
    tmp = csv_path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, csv_path)
    return csv_path


# Segment lengths are desk scale: at the default 8 m/s and 20 fps the
# camera covers 0.4 m per frame, so labels vary within a ~100-frame clip.
TRACK_PRESETS: dict[str, list[tuple[float, float]]] = {
    "straight": [(0.0, 400.0)],
    "left": [(0.02, 300.0)],
    "right": [(-0.02, 300.0)],
    "slalom": [(0.03, 6.0), (-0.03, 6.0), (0.03, 6.0), (-0.03, 6.0)],
    "mixed": [(0.0, 5.0), (0.025, 7.0), (0.0, 4.0), (-0.035, 6.0),
              (0.015, 8.0), (-0.02, 5.0)],
    "mixed2": [(0.03, 6.0), (0.0, 5.0), (-0.015, 9.0), (0.02, 4.0),
               (-0.03, 7.0), (0.01, 6.0)],
}

PRESET_SPEEDS: dict[str, list[float]] = {
    "mixed": [8.0, 6.0, 10.0, 7.0, 9.0, 8.0],
    "mixed2": [9.0, 7.0, 8.0, 10.0, 6.0, 8.0],
    "slalom": [7.0, 9.0, 7.0, 9.0],
}


def parse_track(text: str, image_h: int = 64, image_w: int = 64, seed: int = 0) -> TrackSpec:
    """Build a TrackSpec from a preset name or ``curvature@length`` list.

    Examples: ``mixed``; ``0.02@50,-0.03@40,0@60``.
    """
    name = text.strip().lower()
    if name in TRACK_PRESETS:
        return TrackSpec(segments=list(TRACK_PRESETS[name]),
                         speeds=PRESET_SPEEDS.get(name, 8.0),
                         image_h=image_h, image_w=image_w, seed=seed)
    segments = []
    try:
        for part in name.split(","):
            curvature, length = part.split("@")
            segments.append((float(curvature), float(length)))
    except ValueError:
        raise ContractError(
            f"unrecognized track {text!r}: use a preset {sorted(TRACK_PRESETS)} "
            "or 'curvature@length,...'") from None
    return TrackSpec(segments=segments, image_h=image_h, image_w=image_w, seed=seed)
