//! Scatter-plot SVG emission with the fixed color coding: red data points,
//! green flow samples, blue boundary samples.

use std::fmt::Write as _;
use std::path::Path;

use bdsg_core::batch::Batch;
use bdsg_core::error::{Error, Result};

const FIG_WIDTH: f64 = 800.0;

/// Renders the point sets into an axis-equal SVG enclosing every point with
/// a 5% margin. Output bytes are a pure function of the inputs.
pub fn emit_scatter(
    data: &Batch,
    flow_samples: Option<&Batch>,
    boundary: &Batch,
    path: &Path,
) -> Result<()> {
    let svg = scatter_svg(data, flow_samples, boundary)?;
    std::fs::write(path, svg)?;
    Ok(())
}

pub fn scatter_svg(data: &Batch, flow_samples: Option<&Batch>, boundary: &Batch) -> Result<String> {
    let sets: Vec<(&Batch, &str)> = {
        let mut v = vec![(data, "red")];
        if let Some(f) = flow_samples {
            v.push((f, "green"));
        }
        v.push((boundary, "blue"));
        v
    };
    for (b, _) in &sets {
        if !b.is_empty() && b.dim() != 2 {
            return Err(Error::config(format!(
                "scatter plots are 2D only, got dimension {}",
                b.dim()
            )));
        }
    }
    if data.is_empty() {
        return Err(Error::config("scatter plot needs at least the data set"));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (b, _) in &sets {
        for row in b.rows() {
            for k in 0..2 {
                lo[k] = lo[k].min(row[k]);
                hi[k] = hi[k].max(row[k]);
            }
        }
    }
    let span = [(hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9)];
    let margin = 0.05 * span[0].max(span[1]);
    let x0 = lo[0] - margin;
    let x1 = hi[0] + margin;
    let y0 = lo[1] - margin;
    let y1 = hi[1] + margin;
    let w = x1 - x0;
    let h = y1 - y0;
    // one unit of data space maps to the same pixel count on both axes
    let height_px = FIG_WIDTH * h / w;
    let r = 0.004 * w.max(h);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{FIG_WIDTH:.0}" height="{height_px:.2}" viewBox="{x0:.6} {y0:.6} {w:.6} {h:.6}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.6}" y="{y0:.6}" width="{w:.6}" height="{h:.6}" fill="white"/>"#
    );
    for (b, color) in &sets {
        for row in b.rows() {
            // SVG y axis points down: reflect within the viewport
            let y_flipped = y0 + y1 - row[1];
            let _ = writeln!(
                out,
                r#"<circle cx="{:.6}" cy="{:.6}" r="{r:.6}" fill="{color}" fill-opacity="0.7"/>"#,
                row[0], y_flipped
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
