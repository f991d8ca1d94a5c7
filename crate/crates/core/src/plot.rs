//! Tiny self-contained SVG writers for the evaluation artifacts: trajectory
//! traces, orientation heatmaps, and error curves. No rendering
//! dependencies; the output is plain markup.

fn color_cycle(i: usize) -> String {
    // evenly spaced hues
    let hue = (i as f64 * 47.0) % 360.0;
    format!("hsl({hue:.0}, 70%, 45%)")
}

fn bounds(series: &[Vec<(f64, f64)>]) -> (f64, f64, f64, f64) {
    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in s {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }
    if !min_x.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad_x = (max_x - min_x).max(1e-9) * 0.05;
    let pad_y = (max_y - min_y).max(1e-9) * 0.05;
    (min_x - pad_x, max_x + pad_x, min_y - pad_y, max_y + pad_y)
}

/// Polyline chart; one colored polyline per series.
pub fn polyline_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (640.0, 480.0);
    let margin = 40.0;
    let data: Vec<Vec<(f64, f64)>> = series.iter().map(|(_, pts)| pts.clone()).collect();
    let (min_x, max_x, min_y, max_y) = bounds(&data);
    let sx = |x: f64| margin + (x - min_x) / (max_x - min_x) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - min_y) / (max_y - min_y) * (h - 2.0 * margin);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        w / 2.0,
        escape(title),
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"><title>{}</title></polyline>\n",
            color_cycle(i),
            path.join(" "),
            escape(label)
        ));
    }
    // axis extents
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"{}\" font-size=\"10\">({min_x:.2}, {min_y:.2})</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">({max_x:.2}, {max_y:.2})</text>\n",
        h - margin + 14.0,
        w - margin,
        margin - 6.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of a square grid; NaN cells are grey. Values are mapped to hue
/// directly, which suits angular data.
pub fn angle_heatmap(title: &str, grid: &[Vec<f64>]) -> String {
    let n = grid.len().max(1);
    let cell = 420.0 / n as f64;
    let (w, h) = (460.0, 500.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for (i, row) in grid.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() {
                let hue = (v.to_degrees().rem_euclid(360.0)).round();
                format!("hsl({hue}, 80%, 50%)")
            } else {
                "#bbb".to_string()
            };
            let x = 20.0 + j as f64 * cell;
            let y = 40.0 + (n - 1 - i) as f64 * cell;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"{fill}\" stroke=\"white\" stroke-width=\"0.5\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_polylines_and_title() {
        let svg = polyline_chart(
            "traces",
            &[
                ("a".into(), vec![(0.0, 0.0), (1.0, 1.0)]),
                ("b".into(), vec![(0.0, 1.0), (1.0, 0.0)]),
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("traces"));
    }

    #[test]
    fn heatmap_handles_nan_cells() {
        let svg = angle_heatmap("orientation", &[vec![0.0, f64::NAN], vec![1.0, -1.0]]);
        assert!(svg.contains("#bbb"));
        assert_eq!(svg.matches("<rect").count(), 5); // 4 cells + background
    }
}
