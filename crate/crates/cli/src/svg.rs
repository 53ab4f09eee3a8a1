//! Minimal self-contained SVG line plots (no external assets).

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Render one or more series as polylines with simple axes and labels.
/// Log-scaled axes are handled by the caller passing transformed data plus
/// suitable axis labels.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;

    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }
    if !min_x.is_finite() || min_x == max_x {
        max_x = min_x + 1.0;
    }
    if !min_y.is_finite() || min_y == max_y {
        max_y = min_y + 1.0;
    }
    let sx = |x: f64| ml + (x - min_x) / (max_x - min_x) * pw;
    let sy = |y: f64| mt + ph - (y - min_y) / (max_y - min_y) * ph;

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut body = String::new();
    body.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#333\"/>\n"
    ));
    for (i, s) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        for &(x, y) in &s.points {
            body.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            ml + 8.0,
            mt + 16.0 + 14.0 * i as f64,
            s.label
        ));
    }
    // axis ticks: min and max only, plus labels
    body.push_str(&format!(
        "<text x=\"{ml}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\">{:.3e}</text>\n",
        h - mb + 16.0,
        min_x
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\" text-anchor=\"end\">{:.3e}</text>\n",
        w - mr,
        h - mb + 16.0,
        max_x
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\" text-anchor=\"end\">{:.3e}</text>\n",
        ml - 6.0,
        h - mb,
        min_y
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\" text-anchor=\"end\">{:.3e}</text>\n",
        ml - 6.0,
        mt + 10.0,
        max_y
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#111\" text-anchor=\"middle\">{x_label}</text>\n",
        ml + pw / 2.0,
        h - 12.0
    ));
    body.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" fill=\"#111\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">{y_label}</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0
    ));
    body.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-size=\"14\" fill=\"#111\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    ));

    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_self_contained_svg() {
        let s = line_plot(
            "t",
            "x",
            "y",
            &[Series { label: "a", points: vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)] }],
        );
        assert!(s.starts_with("<svg"));
        assert!(s.contains("polyline"));
        assert!(!s.contains("http://") || s.contains("xmlns"));
    }
}
