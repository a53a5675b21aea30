/// Left-aligned first column, right-aligned others, a rule under the header.
pub fn render(header: &[Vec<String>], rows: &[Vec<String>]) -> String {
    let cols = header.iter().chain(rows).map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0; cols];
    for row in header.iter().chain(rows) {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |row: &Vec<String>| {
        let cells: Vec<String> = (0..cols)
            .map(|i| {
                let cell = row.get(i).map_or("", String::as_str);
                if i == 0 {
                    format!("{cell:<w$}", w = widths[i])
                } else {
                    format!("{cell:>w$}", w = widths[i])
                }
            })
            .collect();
        cells.join("  ").trim_end().to_string()
    };
    let mut out = String::new();
    for row in header {
        out.push_str(&line(row));
        out.push('\n');
    }
    let rule = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn rate(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}
