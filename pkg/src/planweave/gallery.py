"""Static HTML galleries: one page per goal, methods side by side.

Output is deterministic (byte-identical on regeneration) and self-contained:
referenced images are copied into the site.
"""

from __future__ import annotations

import html
import shutil
from dataclasses import dataclass
from pathlib import Path

from .model import MultimodalPlan, parse_plan

_PAGE_STYLE = """
body { font-family: sans-serif; margin: 1.5rem; }
table { border-collapse: collapse; }
td, th { border: 1px solid #ccc; padding: 0.5rem; vertical-align: top; }
img { max-width: 220px; display: block; margin-bottom: 0.4rem; }
.missing { width: 220px; height: 120px; background: #eee; color: #888;
           display: flex; align-items: center; justify-content: center; }
.warnings { color: #a00; }
"""


@dataclass
class GalleryResult:
    pages: list[Path]
    warnings: list[str]


def _load_plans(plans_root: Path) -> list[tuple[Path, MultimodalPlan]]:
    plans = []
    for path in sorted(plans_root.rglob("*.plan")):
        plans.append((path, parse_plan(path.read_text(encoding="utf-8"))))
    return plans


def export_gallery(plans_root: str | Path, out_dir: str | Path) -> GalleryResult:
    """Render one page per goal plus an index. Missing image files become
    placeholder cells and are listed as warnings instead of failing."""
    plans_root = Path(plans_root)
    out_dir = Path(out_dir)
    (out_dir / "assets").mkdir(parents=True, exist_ok=True)
    plans = _load_plans(plans_root)

    by_goal: dict[tuple[str, str], list[MultimodalPlan]] = {}
    titles: dict[tuple[str, str], str] = {}
    for _, plan in plans:
        key = (plan.goal.dataset, plan.goal.id)
        by_goal.setdefault(key, []).append(plan)
        titles[key] = plan.goal.title

    warnings: list[str] = []
    pages: list[Path] = []
    index_rows: list[str] = []
    for key in sorted(by_goal):
        dataset, goal_id = key
        group = sorted(by_goal[key], key=lambda p: p.method.value)
        page_name = f"{dataset}__{goal_id}.html"
        page = _render_goal_page(
            titles[key], group, plans_root, out_dir, warnings
        )
        page_path = out_dir / page_name
        page_path.write_text(page, encoding="utf-8")
        pages.append(page_path)
        methods = ", ".join(p.method.value for p in group)
        index_rows.append(
            f'<li><a href="{html.escape(page_name)}">'
            f"{html.escape(titles[key])}</a> <small>({html.escape(methods)})</small></li>"
        )

    index = (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>Plan gallery</title><style>{_PAGE_STYLE}</style></head>\n"
        "<body><h1>Plan gallery</h1>\n<ul>\n"
        + "\n".join(index_rows)
        + "\n</ul></body></html>\n"
    )
    (out_dir / "index.html").write_text(index, encoding="utf-8")
    return GalleryResult(pages=pages, warnings=warnings)


def _copy_image(
    locator: str, plans_root: Path, out_dir: Path, warnings: list[str]
) -> str | None:
    source = plans_root / locator
    if not source.exists():
        warnings.append(f"missing image: {locator}")
        return None
    target = out_dir / "assets" / source.name
    if not target.exists():
        shutil.copyfile(source, target)
    return f"assets/{source.name}"


def _render_goal_page(
    title: str,
    group: list[MultimodalPlan],
    plans_root: Path,
    out_dir: Path,
    warnings: list[str],
) -> str:
    max_steps = max(len(p.steps) for p in group)
    head = "".join(f"<th>{html.escape(p.method.value)}</th>" for p in group)
    rows = []
    page_warnings: list[str] = []
    for step_pos in range(max_steps):
        cells = []
        for plan in group:
            if step_pos >= len(plan.steps):
                cells.append("<td></td>")
                continue
            step = plan.steps[step_pos]
            parts = []
            if step.image is not None:
                rel = _copy_image(step.image.locator, plans_root, out_dir, page_warnings)
                if rel is None:
                    parts.append('<div class="missing">image missing</div>')
                else:
                    parts.append(f'<img src="{html.escape(rel)}" alt="step image">')
            parts.append(f"<p>{html.escape(step.text)}</p>")
            cells.append(f"<td>{''.join(parts)}</td>")
        rows.append(f"<tr><td>{step_pos + 1}</td>{''.join(cells)}</tr>")
    warnings.extend(page_warnings)
    warning_block = ""
    if page_warnings:
        items = "".join(f"<li>{html.escape(w)}</li>" for w in sorted(set(page_warnings)))
        warning_block = f'<ul class="warnings">{items}</ul>'
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(title)}</title><style>{_PAGE_STYLE}</style></head>\n"
        f"<body><h1>{html.escape(title)}</h1>\n"
        f"<table><thead><tr><th>Step</th>{head}</tr></thead>\n"
        f"<tbody>{''.join(rows)}</tbody></table>\n"
        f"{warning_block}</body></html>\n"
    )
