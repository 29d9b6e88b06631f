//! Minimal standalone SVG emitter for the harness plots; hand-rolled so the
//! output bytes are fully deterministic and schema-checkable.

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt(v: f64) -> String {
    format!("{:.3}", v)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx =
            MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R);
        let sy = HEIGHT
            - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B);
        (sx, sy)
    }
}

fn document(title: &str, body: String) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{title}</text>\n{body}</svg>\n",
        tx = WIDTH / 2.0,
        title = escape(title),
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let (x0, y0) = frame.map(frame.x_min, frame.y_min);
    let (x1, _) = frame.map(frame.x_max, frame.y_min);
    let (_, y1) = frame.map(frame.x_min, frame.y_max);
    let mut out = String::new();
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(x0),
        fmt(y0),
        fmt(x1),
        fmt(y0)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(x0),
        fmt(y0),
        fmt(x0),
        fmt(y1)
    ));
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let xv = frame.x_min + frac * (frame.x_max - frame.x_min);
        let yv = frame.y_min + frac * (frame.y_max - frame.y_min);
        let (sx, sy0) = frame.map(xv, frame.y_min);
        let (sx0, sy) = frame.map(frame.x_min, yv);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(sx),
            fmt(sy0),
            fmt(sx),
            fmt(sy0 + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{}</text>\n",
            fmt(sx),
            fmt(sy0 + 18.0),
            fmt(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(sx0 - 5.0),
            fmt(sy),
            fmt(sx0),
            fmt(sy)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{}</text>\n",
            fmt(sx0 - 8.0),
            fmt(sy + 3.0),
            fmt(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n",
        fmt((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        fmt(HEIGHT - 10.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(HEIGHT / 2.0),
        fmt(HEIGHT / 2.0),
        escape(y_label)
    ));
    out
}

/// Multi-series line plot; coordinates are plotted as given (pre-transform
/// to logs upstream when a log-log view is wanted).
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let frame = frame_of(&pts);
    let mut body = axes(&frame, x_label, y_label);
    for (idx, (label, data)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = data
            .iter()
            .map(|&(x, y)| {
                let (sx, sy) = frame.map(x, y);
                format!("{},{}", fmt(sx), fmt(sy))
            })
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{}</text>\n",
            fmt(WIDTH - MARGIN_R - 150.0),
            fmt(MARGIN_T + 14.0 * idx as f64),
            escape(label)
        ));
    }
    document(title, body)
}

/// Fixed-bin histogram of a sample.
pub fn histogram(title: &str, x_label: &str, values: &[f64], bins: usize) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return document(
            title,
            axes(
                &Frame {
                    x_min: 0.0,
                    x_max: 1.0,
                    y_min: 0.0,
                    y_max: 1.0,
                },
                x_label,
                "count",
            ),
        );
    }
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let b = (((v - lo) / span) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let max_count = *counts.iter().max().unwrap() as f64;
    let frame = Frame {
        x_min: lo,
        x_max: lo + span,
        y_min: 0.0,
        y_max: max_count.max(1.0),
    };
    let mut body = axes(&frame, x_label, "count");
    for (b, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let xl = lo + span * b as f64 / bins as f64;
        let xr = lo + span * (b + 1) as f64 / bins as f64;
        let (sx0, sy0) = frame.map(xl, 0.0);
        let (sx1, sy1) = frame.map(xr, c as f64);
        body.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#1f77b4\" \
             stroke=\"white\" stroke-width=\"0.5\"/>\n",
            fmt(sx0),
            fmt(sy1),
            fmt(sx1 - sx0),
            fmt(sy0 - sy1)
        ));
    }
    document(title, body)
}

fn frame_of(pts: &[(f64, f64)]) -> Frame {
    let finite: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if finite.is_empty() {
        return Frame {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
    }
    let x_min = finite.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = finite.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = finite.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = finite.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Frame {
        x_min,
        x_max: if x_max > x_min { x_max } else { x_min + 1.0 },
        y_min,
        y_max: if y_max > y_min { y_max } else { y_min + 1.0 },
    }
}

/// Well-formedness scan: every open tag closes in order and the text is
/// a single rooted element. Used by tests as the conformance oracle.
pub fn check_well_formed(svg: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut roots = 0usize;
    let mut rest = svg;
    while let Some(start) = rest.find('<') {
        let tail = &rest[start + 1..];
        let end = tail.find('>').ok_or("unterminated tag")?;
        let tag = &tail[..end];
        rest = &tail[end + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            let open = stack.pop().ok_or("close without open")?;
            if open != name.trim() {
                return Err(format!("mismatched </{}> against <{}>", name.trim(), open));
            }
            if stack.is_empty() {
                roots += 1;
            }
        } else if tag.ends_with('/') {
            if stack.is_empty() {
                return Err("self-closing element outside the root".into());
            }
        } else {
            let name = tag.split_whitespace().next().ok_or("empty tag")?;
            stack.push(name.to_string());
        }
    }
    if !stack.is_empty() {
        return Err(format!("unclosed elements: {stack:?}"));
    }
    if roots != 1 {
        return Err(format!("expected one root element, found {roots}"));
    }
    Ok(())
}
