"""Command line entry point: render figures from analysis artifacts."""

from __future__ import annotations

import sys

import click

from .io import SchemaError
from .render import render_bundle3d, render_heatmap, render_sections3d


@click.group()
def main():
    """Figure rendering for instability-analysis CSV artifacts."""


@main.command()
@click.argument("kind", type=click.Choice(["heatmap", "bundle3d", "sections3d"]))
@click.argument("inputs", nargs=-1, required=True)
@click.option("-o", "--output", required=True, help="output image path")
@click.option("--sigma", default=0, show_default=True,
              help="critical-point id to draw (bundle3d)")
@click.option("--hmax", default=None, type=float,
              help="height cap for bundle3d samples")
@click.option("--elev", default=None, type=float, help="3-D camera elevation")
@click.option("--azim", default=None, type=float, help="3-D camera azimuth")
@click.option("--dpi", default=110, show_default=True)
def render(kind, inputs, output, sigma, hmax, elev, azim, dpi):
    """Render KIND from artifact INPUTS.

    heatmap: growthmap.csv; bundle3d: flows CSV; sections3d: sections CSV
    plus an optional triangle-mesh CSV (d=3 artifacts).
    """
    camera = {k: v for k, v in (("elev", elev), ("azim", azim)) if v is not None}
    try:
        if kind == "heatmap":
            if len(inputs) != 1:
                raise SchemaError("heatmap takes exactly one growthmap CSV")
            render_heatmap(inputs[0], output, dpi=dpi)
        elif kind == "bundle3d":
            if len(inputs) != 1:
                raise SchemaError("bundle3d takes exactly one flows CSV")
            render_bundle3d(inputs[0], output, sigma=sigma, hmax=hmax,
                            dpi=dpi, **camera)
        else:
            if len(inputs) not in (1, 2):
                raise SchemaError(
                    "sections3d takes a sections CSV and an optional triangles CSV")
            triangles = inputs[1] if len(inputs) == 2 else None
            render_sections3d(inputs[0], output, triangles_path=triangles,
                              dpi=dpi, **camera)
    except (SchemaError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {output}")
