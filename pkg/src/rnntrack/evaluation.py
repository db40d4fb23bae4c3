"""Sequence ingestion, synthetic sequences, and one-pass-evaluation metrics.

Sequences follow the common benchmark layout: an image subfolder of
zero-padded numbered frames plus a ground-truth text file with one
"x,y,w,h" line per frame (1-indexed top-left corner).  The synthetic
generator composites a textured square over per-frame noise and emits
exact ground truth, giving a fully controlled substrate for end-to-end
checks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .imagery import GrayImage, to_gray

PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)  # pixels
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)  # overlap

_IMAGE_EXTS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass
class Sequence:
    frames: list  # of GrayImage
    boxes: np.ndarray | None = None  # (N, 4) x,y,w,h, 1-indexed

    def __post_init__(self):
        if self.boxes is not None:
            self.boxes = np.asarray(self.boxes, dtype=np.float64)
            if len(self.boxes) != len(self.frames):
                raise ValueError(
                    f"{len(self.frames)} frames but {len(self.boxes)} ground-truth boxes")

    def __len__(self) -> int:
        return len(self.frames)


def _frame_number(path: Path) -> int:
    digits = re.findall(r"\d+", path.stem)
    return int(digits[-1]) if digits else -1


def parse_box_line(line: str, n_fields: int = 4) -> np.ndarray:
    parts = [p for p in re.split(r"[,\s\t]+", line.strip()) if p]
    if len(parts) != n_fields:
        raise ValueError(f"expected {n_fields} fields, got {len(parts)}")
    return np.array([float(p) for p in parts])


def read_box_file(path, allow_frame_column: bool = False) -> np.ndarray:
    """Parse a box-per-line file; raises with the offending line number."""
    boxes = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p for p in re.split(r"[,\s\t]+", line.strip()) if p]
        if allow_frame_column and len(parts) == 5:
            parts = parts[1:]
        if len(parts) != 4:
            raise ValueError(f"{path}: line {lineno}: expected 4 box fields, got {len(parts)}")
        try:
            boxes.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: unparsable number") from None
    if not boxes:
        raise ValueError(f"{path}: no boxes found")
    return np.array(boxes, dtype=np.float64)


def load_sequence(directory) -> Sequence:
    """Read frames and ground truth from a benchmark-layout directory."""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {root}")
    img_dir = root / "img"
    if not img_dir.is_dir():
        candidates = [d for d in root.iterdir() if d.is_dir()
                      and any(f.suffix.lower() in _IMAGE_EXTS for f in d.iterdir())]
        if len(candidates) == 1:
            img_dir = candidates[0]
        else:
            raise FileNotFoundError(f"no image subfolder under {root}")
    files = sorted((f for f in img_dir.iterdir() if f.suffix.lower() in _IMAGE_EXTS),
                   key=_frame_number)
    if not files:
        raise FileNotFoundError(f"no image files under {img_dir}")

    gt_path = None
    for name in ("groundtruth_rect.txt", "groundtruth.txt"):
        if (root / name).is_file():
            gt_path = root / name
            break
    if gt_path is None:
        txts = sorted(root.glob("*.txt"))
        if not txts:
            raise FileNotFoundError(f"ground truth not found under {root}")
        gt_path = txts[0]
    boxes = read_box_file(gt_path)
    if len(boxes) != len(files):
        raise ValueError(
            f"{len(files)} frames but {len(boxes)} ground-truth lines in {gt_path}")

    frames = [to_gray(np.asarray(Image.open(f))) for f in files]
    return Sequence(frames, boxes)


def make_texture(size: int, seed) -> np.ndarray:
    """Smooth full-contrast random texture (bilinearly upsampled noise)."""
    rng = np.random.default_rng(seed)
    coarse_n = max(2, size // 5)
    coarse = rng.uniform(0.0, 1.0, (coarse_n, coarse_n))
    pos = np.linspace(0, coarse_n - 1, size)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, coarse_n - 1)
    f = pos - i0
    rows = (coarse[i0][:, i0] * (1 - f)[:, None] + coarse[i1][:, i0] * f[:, None])
    rows1 = (coarse[i0][:, i1] * (1 - f)[:, None] + coarse[i1][:, i1] * f[:, None])
    tex = rows * (1 - f)[None, :] + rows1 * f[None, :]
    lo, hi = tex.min(), tex.max()
    return (tex - lo) / (hi - lo) if hi > lo else np.full_like(tex, 0.5)


def synth_sequence(width: int, height: int, n_frames: int, target_size: int,
                   start, velocity, texture_seed=0, noise_seed=1,
                   noise_level: float = 0.2) -> Sequence:
    """Textured square drifting over per-frame noise, with exact boxes.

    start is the 1-indexed (x, y) of the target's top-left pixel in the
    first frame; per-frame positions are rounded to whole pixels and
    reported as ground truth.
    """
    if n_frames < 1:
        raise ValueError("need at least one frame")
    texture = make_texture(target_size, texture_seed)
    rng = np.random.default_rng(noise_seed)
    frames, boxes = [], []
    for t in range(n_frames):
        x = int(round(start[0] + velocity[0] * t))
        y = int(round(start[1] + velocity[1] * t))
        if x < 1 or y < 1 or x + target_size - 1 > width or y + target_size - 1 > height:
            raise ValueError(f"target leaves the frame at step {t}")
        bg = 0.5 + noise_level * (rng.uniform(0.0, 1.0, (height, width)) - 0.5)
        pix = np.clip(bg, 0.0, 1.0)
        pix[y - 1:y - 1 + target_size, x - 1:x - 1 + target_size] = texture
        frames.append(GrayImage(pix))
        boxes.append([x, y, target_size, target_size])
    return Sequence(frames, np.array(boxes, dtype=np.float64))


def write_sequence(seq: Sequence, directory) -> None:
    """Write frames and ground truth in the ingestion layout."""
    root = Path(directory)
    (root / "img").mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames, start=1):
        img = Image.fromarray(np.round(frame.pixels * 255.0).astype(np.uint8))
        img.save(root / "img" / f"{i:04d}.png")
    if seq.boxes is not None:
        lines = [",".join(str(int(v)) if float(v).is_integer() else repr(float(v)) for v in box)
                 for box in seq.boxes]
        (root / "groundtruth_rect.txt").write_text("\n".join(lines) + "\n")


def center_error(a, b) -> float:
    """Euclidean distance between box centers."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a[2] <= 0 or a[3] <= 0 or b[2] <= 0 or b[3] <= 0:
        raise ValueError("box dimensions must be positive")
    ca = a[:2] + a[2:] / 2.0
    cb = b[:2] + b[2:] / 2.0
    return float(np.hypot(*(ca - cb)))


def iou(a, b) -> float:
    """Intersection over union of two axis-aligned boxes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a[2] <= 0 or a[3] <= 0 or b[2] <= 0 or b[3] <= 0:
        raise ValueError("box dimensions must be positive")
    ix = max(0.0, min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = a[2] * a[3] + b[2] * b[3] - inter
    # rounding in the edge sums can push inter a hair past union
    return float(min(1.0, inter / union))


@dataclass
class MetricCurves:
    precision: np.ndarray  # at integer pixel thresholds 0..50
    success: np.ndarray  # at overlap thresholds 0..1 step 0.05
    precision_at_20: float
    success_auc: float

    def to_csv(self) -> str:
        lines = ["metric,threshold,value"]
        for t, v in zip(PRECISION_THRESHOLDS, self.precision):
            lines.append(f"precision,{t:g},{v!r}")
        for t, v in zip(SUCCESS_THRESHOLDS, self.success):
            lines.append(f"success,{t:g},{v!r}")
        lines.append(f"summary,precision_at_20,{self.precision_at_20!r}")
        lines.append(f"summary,success_auc,{self.success_auc!r}")
        return "\n".join(lines) + "\n"


def ope_curves(result_boxes, gt_boxes) -> MetricCurves:
    """Precision and success curves for one tracking run.

    precision(t) = share of frames with center error <= t pixels;
    success(t) = share of frames with overlap strictly above t; the
    summary numbers are precision at 20 px and the mean of the success
    curve over its threshold grid.
    """
    result_boxes = np.asarray(result_boxes, dtype=np.float64)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64)
    if len(result_boxes) != len(gt_boxes):
        raise ValueError(f"{len(result_boxes)} result boxes vs {len(gt_boxes)} ground truth")
    if len(result_boxes) == 0:
        raise ValueError("need at least one frame")
    errors = np.array([center_error(r, g) for r, g in zip(result_boxes, gt_boxes)])
    overlaps = np.array([iou(r, g) for r, g in zip(result_boxes, gt_boxes)])
    precision = (errors[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    success = (overlaps[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    return MetricCurves(precision, success,
                        float(precision[20]), float(success.mean()))
