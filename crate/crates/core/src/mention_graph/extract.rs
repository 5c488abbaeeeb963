//! @-mention extraction from raw markdown.

/// A mention token: the login as written and the byte offset of its `@`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub login: String,
    pub offset: usize,
}

const MAX_LOGIN: usize = 39;

fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_login_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-'
}

/// Finds `@login` tokens outside fenced code blocks, inline code spans and
/// `>` quote lines. Order and duplicates are preserved. Team mentions
/// (`@org/team`) are skipped.
pub fn extract_mentions(body: &str) -> Vec<Mention> {
    let bytes = body.as_bytes();
    let masked = code_and_quote_mask(body);
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'@' || masked[i] || (i > 0 && is_word(bytes[i - 1])) {
            i += 1;
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while end < bytes.len() && is_login_byte(bytes[end]) {
            end += 1;
        }
        let len = end - start;
        let team = end + 1 < bytes.len() && bytes[end] == b'/' && is_login_byte(bytes[end + 1]);
        if (1..=MAX_LOGIN).contains(&len) && !team && !masked[start..end].iter().any(|&m| m) {
            out.push(Mention {
                login: body[start..end].to_string(),
                offset: i,
            });
        }
        i = end.max(i + 1);
    }
    out
}

/// `true` for every byte inside a fenced block, a code span, or a quote line.
fn code_and_quote_mask(body: &str) -> Vec<bool> {
    let bytes = body.as_bytes();
    let mut mask = vec![false; bytes.len()];
    let mut fence: Option<(u8, usize)> = None;
    let mut line_start = 0;
    // prose segments (byte ranges) eligible for inline code span scanning
    let mut prose: Vec<(usize, usize)> = Vec::new();
    while line_start < bytes.len() {
        let line_end = body[line_start..].find('\n').map(|p| line_start + p + 1).unwrap_or(bytes.len());
        let line = &body[line_start..line_end];
        let indent = line.len() - line.trim_start_matches(' ').len();
        let trimmed = line.trim_start_matches(' ');
        let fence_open = |t: &str| -> Option<(u8, usize)> {
            let c = *t.as_bytes().first()?;
            if c != b'`' && c != b'~' {
                return None;
            }
            let run = t.bytes().take_while(|&b| b == c).count();
            (run >= 3).then_some((c, run))
        };
        match fence {
            Some((c, run)) => {
                mask[line_start..line_end].iter_mut().for_each(|m| *m = true);
                if indent <= 3 {
                    if let Some((c2, run2)) = fence_open(trimmed) {
                        let rest = trimmed[run2..].trim();
                        if c2 == c && run2 >= run && rest.is_empty() {
                            fence = None;
                        }
                    }
                }
            }
            None => {
                if indent <= 3 && fence_open(trimmed).is_some() {
                    fence = fence_open(trimmed);
                    mask[line_start..line_end].iter_mut().for_each(|m| *m = true);
                } else if trimmed.starts_with('>') {
                    mask[line_start..line_end].iter_mut().for_each(|m| *m = true);
                } else {
                    prose.push((line_start, line_end));
                }
            }
        }
        line_start = line_end;
    }
    mask_code_spans(bytes, &prose, &mut mask);
    mask
}

/// Backtick code spans may cross line breaks within a paragraph, so prose
/// lines are scanned as one stream, stopping at masked regions.
fn mask_code_spans(bytes: &[u8], prose: &[(usize, usize)], mask: &mut [bool]) {
    // merge adjacent prose lines into runs
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &(s, e) in prose {
        match runs.last_mut() {
            Some(last) if last.1 == s => last.1 = e,
            _ => runs.push((s, e)),
        }
    }
    for (s, e) in runs {
        let mut i = s;
        while i < e {
            if bytes[i] != b'`' {
                i += 1;
                continue;
            }
            let open_len = bytes[i..e].iter().take_while(|&&b| b == b'`').count();
            let content_start = i + open_len;
            // find a closing run of exactly open_len backticks
            let mut j = content_start;
            let mut close = None;
            while j < e {
                if bytes[j] == b'`' {
                    let run = bytes[j..e].iter().take_while(|&&b| b == b'`').count();
                    if run == open_len {
                        close = Some(j);
                        break;
                    }
                    j += run;
                } else {
                    j += 1;
                }
            }
            match close {
                Some(c) => {
                    mask[i..c + open_len].iter_mut().for_each(|m| *m = true);
                    i = c + open_len;
                }
                None => i = content_start,
            }
        }
    }
}
