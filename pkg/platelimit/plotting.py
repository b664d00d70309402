"""Static log-log convergence plots rendered to SVG from Jinja2 templates."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from jinja2 import Environment, FileSystemLoader, Template, TemplateNotFound

from platelimit.exceptions import InvalidArgumentError

WIDTH = 640
HEIGHT = 480
MARGIN_LEFT = 80
MARGIN_RIGHT = 30
MARGIN_TOP = 40
MARGIN_BOTTOM = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


class TemplateManager:
    """Loads the package's Jinja2 templates."""

    def __init__(self, template_dir: Optional[Path] = None):
        self.logger = logging.getLogger(__name__)
        if template_dir is None:
            template_dir = Path(__file__).parent / "templates"
        if not template_dir.exists():
            raise FileNotFoundError(f"Template directory not found: {template_dir}")
        self.template_dir = template_dir
        self.env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            autoescape=True,
        )
        self.logger.debug(f"Initialized template manager with directory: {template_dir}")

    def load_template(self, template_name: str) -> Template:
        try:
            return self.env.get_template(template_name)
        except TemplateNotFound as exc:
            raise FileNotFoundError(f"Template not found: {template_name}") from exc

    def render_template(self, template_name: str, context: Dict[str, Any]) -> str:
        return self.load_template(template_name).render(**context)


@dataclass(frozen=True)
class Series:
    label: str
    points: Tuple[Tuple[float, float], ...]  # (h, relative error)

    def plottable(self) -> List[Tuple[float, float]]:
        return [(h, e) for h, e in self.points if h > 0 and e is not None and e > 0 and math.isfinite(e)]


def _decades(values: Sequence[float]) -> Tuple[int, int]:
    lo = math.floor(math.log10(min(values)))
    hi = math.ceil(math.log10(max(values)))
    return lo, max(hi, lo + 1)


class LogLogAxes:
    """Maps data to pixel coordinates on decade-aligned logarithmic axes."""

    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        self.x_decades = _decades(xs)
        self.y_decades = _decades(ys)
        self.left = MARGIN_LEFT
        self.right = WIDTH - MARGIN_RIGHT
        self.top = MARGIN_TOP
        self.bottom = HEIGHT - MARGIN_BOTTOM

    def x(self, value: float) -> float:
        lo, hi = self.x_decades
        return self.left + (math.log10(value) - lo) / (hi - lo) * (self.right - self.left)

    def y(self, value: float) -> float:
        lo, hi = self.y_decades
        return self.bottom - (math.log10(value) - lo) / (hi - lo) * (self.bottom - self.top)

    def x_ticks(self) -> List[Dict[str, Any]]:
        lo, hi = self.x_decades
        return [{"pos": round(self.x(10.0**k), 2), "label": f"1e{k}"} for k in range(lo, hi + 1)]

    def y_ticks(self) -> List[Dict[str, Any]]:
        lo, hi = self.y_decades
        return [{"pos": round(self.y(10.0**k), 2), "label": f"1e{k}"} for k in range(lo, hi + 1)]


def render_convergence_svg(
    series: Sequence[Series],
    title: str = "Relative error versus mesh size",
    x_label: str = "h / a",
    y_label: str = "relative error",
    manager: Optional[TemplateManager] = None,
) -> str:
    """SVG document with one polyline per series; non-positive errors are skipped."""
    usable = [(s, s.plottable()) for s in series]
    usable = [(s, pts) for s, pts in usable if pts]
    if not usable:
        raise InvalidArgumentError("no positive relative errors to plot")
    xs = [h for _, pts in usable for h, _ in pts]
    ys = [e for _, pts in usable for _, e in pts]
    axes = LogLogAxes(xs, ys)
    lines = []
    for index, (s, pts) in enumerate(usable):
        coords = [(round(axes.x(h), 2), round(axes.y(e), 2)) for h, e in sorted(pts, reverse=True)]
        lines.append(
            {
                "label": s.label,
                "color": COLORS[index % len(COLORS)],
                "points": " ".join(f"{x},{y}" for x, y in coords),
                "markers": coords,
                "legend_y": MARGIN_TOP + 20 + 18 * index,
            }
        )
    context = {
        "width": WIDTH,
        "height": HEIGHT,
        "left": axes.left,
        "right": axes.right,
        "top": axes.top,
        "bottom": axes.bottom,
        "title": title,
        "x_label": x_label,
        "y_label": y_label,
        "x_ticks": axes.x_ticks(),
        "y_ticks": axes.y_ticks(),
        "lines": lines,
    }
    return (manager or TemplateManager()).render_template("convergence.svg.j2", context)


def write_convergence_svg(path: Union[str, Path], series: Sequence[Series], **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_convergence_svg(series, **kwargs), encoding="utf-8", newline="\n")
    logging.getLogger(__name__).debug(f"Wrote convergence plot {path}")
    return path
