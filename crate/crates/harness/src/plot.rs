//! Minimal SVG rendering for the rate study: median error against window
//! volume on log-log axes, with the fitted and theoretical slopes overlaid.
//!
//! Hand-rolled on purpose: one fixed plot type, no styling knobs, and byte
//! deterministic output (coordinates are formatted with fixed precision).

use crate::HarnessError;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 56.0;

struct LogAxes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl LogAxes {
    fn x(&self, n: f64) -> f64 {
        let t = (n.ln() - self.x_min) / (self.x_max - self.x_min);
        MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, err: f64) -> f64 {
        let t = (err.ln() - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Renders the study plot. `medians` pairs each window volume with its
/// median error; `fitted` and `theoretical` are (slope, intercept) pairs for
/// ln(error) = slope * ln(n) + intercept.
pub fn render_rate_plot(
    path: &Path,
    medians: &[(f64, f64)],
    fitted: (f64, f64),
    theoretical: (f64, f64),
) -> Result<(), HarnessError> {
    if medians.len() < 2 || medians.iter().any(|&(n, e)| !(n > 0.0 && e > 0.0)) {
        return Err(HarnessError::Runtime(
            "rate plot needs at least two positive (n, error) pairs".into(),
        ));
    }
    let x_min = medians.first().unwrap().0.ln();
    let x_max = medians.last().unwrap().0.ln();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &(n, err) in medians {
        for line in [fitted, theoretical] {
            let fit = line.0 * n.ln() + line.1;
            y_min = y_min.min(fit);
            y_max = y_max.max(fit);
        }
        y_min = y_min.min(err.ln());
        y_max = y_max.max(err.ln());
    }
    let pad = 0.08 * (y_max - y_min).max(1e-3);
    let axes = LogAxes {
        x_min,
        x_max,
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );

    // Axis frame.
    let _ = writeln!(
        svg,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"#444\" stroke-width=\"1\"/>",
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    );

    // Ticks: one per observed n, plus decade ticks on the error axis.
    for &(n, _) in medians {
        let x = axes.x(n);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>",
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
             font-family=\"sans-serif\">{n}</text>",
            HEIGHT - MARGIN_BOTTOM + 20.0
        );
    }
    let first_decade = axes.y_min.exp().log10().ceil() as i32;
    let last_decade = axes.y_max.exp().log10().floor() as i32;
    for decade in first_decade..=last_decade {
        let err = 10f64.powi(decade);
        let y = axes.y(err);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#444\"/>",
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\" \
             font-family=\"sans-serif\">1e{decade}</text>",
            MARGIN_LEFT - 9.0,
            y + 4.0
        );
    }

    // Reference and fitted lines span the observed n range.
    let line_path = |slope: f64, intercept: f64| {
        let n0 = medians.first().unwrap().0;
        let n1 = medians.last().unwrap().0;
        let e0 = (slope * n0.ln() + intercept).exp();
        let e1 = (slope * n1.ln() + intercept).exp();
        format!(
            "M {:.1} {:.1} L {:.1} {:.1}",
            axes.x(n0),
            axes.y(e0),
            axes.x(n1),
            axes.y(e1)
        )
    };
    let _ = writeln!(
        svg,
        "<path d=\"{}\" fill=\"none\" stroke=\"#b55\" stroke-width=\"1.5\" \
         stroke-dasharray=\"6 4\"/>",
        line_path(theoretical.0, theoretical.1)
    );
    let _ = writeln!(
        svg,
        "<path d=\"{}\" fill=\"none\" stroke=\"#58a\" stroke-width=\"1.5\"/>",
        line_path(fitted.0, fitted.1)
    );

    // Median markers on top.
    let mut points = String::new();
    for &(n, err) in medians {
        let _ = write!(points, "{:.1},{:.1} ", axes.x(n), axes.y(err));
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#225\"/>",
            axes.x(n),
            axes.y(err)
        );
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#225\" stroke-width=\"1\"/>",
        points.trim_end()
    );

    // Legend and axis labels.
    let legend_y = MARGIN_TOP + 14.0;
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{legend_y:.1}\" font-size=\"12\" font-family=\"sans-serif\" \
         fill=\"#225\">median L1 error (slope {:.3})</text>",
        MARGIN_LEFT + 12.0,
        fitted.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\" \
         fill=\"#b55\">reference slope {:.3}</text>",
        MARGIN_LEFT + 12.0,
        legend_y + 16.0,
        theoretical.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         font-family=\"sans-serif\">window volume n (log scale)</text>",
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         font-family=\"sans-serif\" transform=\"rotate(-90 18 {:.1})\">median L1 error \
         (log scale)</text>",
        MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
        MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0
    );
    svg.push_str("</svg>\n");

    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_deterministic_svg_with_both_lines() {
        let dir = tempfile::tempdir().unwrap();
        let medians = vec![(128.0, 0.5), (512.0, 0.32), (2048.0, 0.2)];
        let fitted = (-0.31, 1.1);
        let theoretical = (-1.0 / 3.0, 1.2);
        let path_a = dir.path().join("a.svg");
        let path_b = dir.path().join("b.svg");
        render_rate_plot(&path_a, &medians, fitted, theoretical).unwrap();
        render_rate_plot(&path_b, &medians, fitted, theoretical).unwrap();
        let a = std::fs::read_to_string(&path_a).unwrap();
        assert_eq!(a, std::fs::read_to_string(&path_b).unwrap());
        assert!(a.starts_with("<svg"));
        assert!(a.contains("stroke-dasharray"));
        assert!(a.contains("reference slope -0.333"));
        assert!(a.contains("</svg>"));
    }

    #[test]
    fn rejects_degenerate_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.svg");
        assert!(render_rate_plot(&path, &[(128.0, 0.5)], (0.0, 0.0), (0.0, 0.0)).is_err());
        assert!(
            render_rate_plot(&path, &[(128.0, 0.0), (256.0, 0.1)], (0.0, 0.0), (0.0, 0.0)).is_err()
        );
    }
}
