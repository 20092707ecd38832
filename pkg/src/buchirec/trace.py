"""Trace emission: CSV arcs that round-trip exactly, and SVG output plots.

The CSV layout is one row per flow sample — ``t, j, s, o, xi_1..xi_nu,
xih_1..xih_nu, v_h`` — so a jump appears as two rows sharing the same t with
consecutive j.  Floats are written with round-trip precision; metadata the
rows cannot carry (termination flag, the successors not taken at each jump)
travels in ``#`` comment lines, so parsing a written file rebuilds the arc
bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .hybrid_sim import FlowSegment, HybridArc, HybridSystem, JumpRecord

__all__ = ["write_trace_csv", "read_trace_csv", "plot_output_svg"]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(path: str | Path, system: HybridSystem, arc: HybridArc,
                    cert=None) -> None:
    """Write an arc as CSV; the certificate column is 0 when cert is None."""
    from .certify import hybrid_lyapunov  # local import to avoid a cycle

    nu = system.plant.nu
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# termination: {arc.termination}\n")
        for rec in arc.jumps:
            alts = ";".join(f"{s},{o}" for s, o in rec.alternatives)
            fh.write(
                f"# jump: index={rec.index} t={_fmt(rec.t)} "
                f"pre={rec.pre[0]},{rec.pre[1]} post={rec.post[0]},{rec.post[1]} "
                f"alt={alts}\n"
            )
        writer = csv.writer(fh)
        header = (
            ["t", "j", "s", "o"]
            + [f"xi_{i + 1}" for i in range(nu)]
            + [f"xih_{i + 1}" for i in range(nu)]
            + ["v_h"]
        )
        writer.writerow(header)
        for seg in arc.segments:
            if cert is not None:
                values = hybrid_lyapunov(system, cert, (seg.s, seg.o), seg.zetas)
                values = np.atleast_1d(values)
            else:
                values = np.zeros(len(seg.times))
            for t, zeta, v in zip(seg.times, seg.zetas, values):
                row = [_fmt(t), str(seg.j), str(seg.s), str(seg.o)]
                row.extend(_fmt(x) for x in zeta)
                row.append(_fmt(v))
                writer.writerow(row)


def read_trace_csv(path: str | Path) -> HybridArc:
    """Rebuild an arc from a trace file written by write_trace_csv."""
    path = Path(path)
    termination = "loaded"
    jump_meta: list[JumpRecord] = []
    data_lines: list[str] = []
    for line in path.read_text().splitlines():
        if line.startswith("# termination:"):
            termination = line.split(":", 1)[1].strip()
        elif line.startswith("# jump:"):
            fields = dict(
                part.split("=", 1) for part in line[len("# jump:") :].split()
            )
            alts = tuple(
                tuple(int(v) for v in pair.split(","))
                for pair in fields["alt"].split(";")
                if pair
            )
            pre = tuple(int(v) for v in fields["pre"].split(","))
            post = tuple(int(v) for v in fields["post"].split(","))
            jump_meta.append(
                JumpRecord(
                    index=int(fields["index"]),
                    t=float(fields["t"]),
                    pre=(pre[0], pre[1]),
                    post=(post[0], post[1]),
                    alternatives=alts,
                )
            )
        elif line.startswith("#"):
            continue
        else:
            data_lines.append(line)

    reader = csv.reader(data_lines)
    header = next(reader)
    nu = sum(1 for name in header if name.startswith("xi_"))
    segments: list[FlowSegment] = []
    cur_j = None
    times: list[float] = []
    rows: list[list[float]] = []
    meta: tuple[int, int] | None = None

    def flush():
        if cur_j is None:
            return
        segments.append(
            FlowSegment(
                j=cur_j,
                s=meta[0],
                o=meta[1],
                times=np.array(times),
                zetas=np.array(rows),
            )
        )

    for record in reader:
        t = float(record[0])
        j = int(record[1])
        s, o = int(record[2]), int(record[3])
        zeta = [float(v) for v in record[4 : 4 + 2 * nu]]
        if j != cur_j:
            flush()
            cur_j, times, rows, meta = j, [], [], (s, o)
        times.append(t)
        rows.append(zeta)
    flush()
    return HybridArc(tuple(segments), tuple(jump_meta), termination)


_MARKERS = ["D", "o", "s", "^", "v", "P"]  # by observation id (1-based, cycled)


def _block_outline(block) -> np.ndarray:
    """Closed boundary polyline of a two-dimensional block ball."""
    r = block.radius
    if block.norm == 1.0:
        pts = np.array([[r, 0], [0, r], [-r, 0], [0, -r], [r, 0]], dtype=float)
    elif block.norm == np.inf:
        pts = np.array([[r, r], [-r, r], [-r, -r], [r, -r], [r, r]], dtype=float)
    else:
        angles = np.linspace(0.0, 2.0 * np.pi, 128)
        pts = np.column_stack([r * np.cos(angles), r * np.sin(angles)])
    return pts + block.center


def plot_output_svg(path: str | Path, system: HybridSystem, arc: HybridArc,
                    title: str | None = None) -> None:
    """Plot output-plane trajectories with region outlines and jump markers.

    Every two-dimensional region block is drawn as its norm-ball outline
    (diamond, circle, or square); the output trajectory restricted to each
    block's coordinate pair is overlaid, with the start marked by a cross and
    each jump by a marker whose shape encodes the observation that fired.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    c = system.plant.c
    fig, ax = plt.subplots(figsize=(7, 7))

    pair_set: list[tuple[int, ...]] = []
    for region in system.regions.values():
        for block in region.blocks:
            if len(block.indices) == 2 and block.indices not in pair_set:
                pair_set.append(block.indices)
    pair_set.sort()

    for region in sorted(system.regions.values(), key=lambda r: r.obs):
        for block in region.blocks:
            if len(block.indices) != 2:
                continue
            outline = _block_outline(block)
            ax.plot(outline[:, 0], outline[:, 1], color="0.4", linewidth=0.8)
        label_block = next((b for b in region.blocks if len(b.indices) == 2), None)
        if label_block is not None:
            ax.annotate(
                f"o{region.obs}",
                xy=tuple(label_block.center),
                fontsize=8,
                ha="center",
                va="center",
                color="0.3",
            )

    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for k, pair in enumerate(pair_set):
        color = colors[k % len(colors)]
        ii = list(pair)
        for seg in arc.segments:
            ys = seg.zetas[:, : system.plant.nu] @ c.T
            ax.plot(ys[:, ii[0]], ys[:, ii[1]], color=color, linewidth=1.0)
        y0 = arc.segments[0].zetas[0, : system.plant.nu] @ c.T
        ax.plot(y0[ii[0]], y0[ii[1]], marker="x", color=color, markersize=8)
        for seg, rec in zip(arc.segments[:-1], arc.jumps):
            y_jump = seg.zetas[-1, : system.plant.nu] @ c.T
            marker = _MARKERS[(rec.pre[1] - 1) % len(_MARKERS)]
            ax.plot(
                y_jump[ii[0]],
                y_jump[ii[1]],
                marker=marker,
                color=color,
                markersize=6,
                fillstyle="none",
                linestyle="none",
            )

    ax.set_aspect("equal")
    ax.set_xlabel("output coordinate 1")
    ax.set_ylabel("output coordinate 2")
    if title:
        ax.set_title(title)
    fig.savefig(Path(path), format="svg", bbox_inches="tight")
    plt.close(fig)
