//! Penn-Treebank-style bracketed constituency trees. Only the structure and
//! the terminals matter downstream (node spans are embedded, heights are
//! correlated with norms); labels are carried along so trees re-render
//! exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseNode {
    pub label: String,
    /// Set on leaves (terminals); internal nodes have children instead.
    pub token: Option<String>,
    pub children: Vec<ParseNode>,
}

impl ParseNode {
    pub fn leaf(token: &str) -> Self {
        Self {
            label: String::new(),
            token: Some(token.to_string()),
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    /// Leaves have height 0; an internal node is one above its tallest child.
    pub fn height(&self) -> usize {
        if self.is_leaf() {
            0
        } else {
            1 + self.children.iter().map(ParseNode::height).max().unwrap()
        }
    }

    /// The terminal tokens under this node, left to right. An internal
    /// node's span is always the concatenation of its children's spans.
    pub fn span(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_span(&mut out);
        out
    }

    fn collect_span<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let Some(t) = &self.token {
            out.push(t);
        }
        for c in &self.children {
            c.collect_span(out);
        }
    }

    /// Every node in the subtree, preorder.
    pub fn nodes(&self) -> Vec<&ParseNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in n.children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, s: &mut String) {
        if let Some(t) = &self.token {
            s.push_str(t);
            return;
        }
        s.push('(');
        s.push_str(&self.label);
        for c in &self.children {
            s.push(' ');
            c.render_into(s);
        }
        s.push(')');
    }
}

/// Parse every tree in `text`. Trees are balanced-paren groups separated by
/// whitespace (blank-line separation included); the conventional unlabeled
/// single-child wrapper `( (S ...) )` is unwrapped.
pub fn parse_bracketed(text: &str) -> Result<Vec<ParseNode>> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut trees = Vec::new();
    loop {
        skip_ws(bytes, &mut pos);
        if pos >= bytes.len() {
            break;
        }
        if bytes[pos] != b'(' {
            return Err(Error::TreeParse {
                offset: pos,
                msg: "expected '(' at top level".into(),
            });
        }
        let mut node = parse_node(bytes, &mut pos)?;
        if node.label.is_empty() && node.children.len() == 1 && !node.children[0].is_leaf() {
            node = node.children.pop().unwrap();
        }
        trees.push(node);
    }
    if trees.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(trees)
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
}

fn read_token(bytes: &[u8], pos: &mut usize) -> String {
    let start = *pos;
    while *pos < bytes.len()
        && !bytes[*pos].is_ascii_whitespace()
        && bytes[*pos] != b'('
        && bytes[*pos] != b')'
    {
        *pos += 1;
    }
    String::from_utf8_lossy(&bytes[start..*pos]).into_owned()
}

fn parse_node(bytes: &[u8], pos: &mut usize) -> Result<ParseNode> {
    debug_assert_eq!(bytes[*pos], b'(');
    *pos += 1; // consume '('
    skip_ws(bytes, pos);
    let mut label = String::new();
    if *pos < bytes.len() && bytes[*pos] != b'(' && bytes[*pos] != b')' {
        label = read_token(bytes, pos);
    }
    let mut children = Vec::new();
    loop {
        skip_ws(bytes, pos);
        if *pos >= bytes.len() {
            return Err(Error::TreeParse {
                offset: *pos,
                msg: "unexpected end of input inside a node".into(),
            });
        }
        match bytes[*pos] {
            b')' => {
                *pos += 1;
                break;
            }
            b'(' => children.push(parse_node(bytes, pos)?),
            _ => {
                let tok = read_token(bytes, pos);
                children.push(ParseNode::leaf(&tok));
            }
        }
    }
    if children.is_empty() {
        return Err(Error::TreeParse {
            offset: *pos,
            msg: format!("node ({label} ...) has no children"),
        });
    }
    Ok(ParseNode {
        label,
        token: None,
        children,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_terminal_tree() {
        // (X word): leaf under the root, root height 1.
        let trees = parse_bracketed("(X word)").unwrap();
        assert_eq!(trees.len(), 1);
        let root = &trees[0];
        assert_eq!(root.label, "X");
        assert_eq!(root.height(), 1);
        assert_eq!(root.span(), vec!["word"]);
        assert_eq!(root.children[0].height(), 0);
    }

    #[test]
    fn nested_tree_heights() {
        let trees = parse_bracketed("(S (NP a) (VP b c))").unwrap();
        let root = &trees[0];
        assert_eq!(root.height(), 2);
        assert_eq!(root.children[0].height(), 1);
        assert_eq!(root.children[1].height(), 1);
        assert_eq!(root.span(), vec!["a", "b", "c"]);
        assert_eq!(root.children[1].span(), vec!["b", "c"]);
    }

    #[test]
    fn span_concatenation_invariant() {
        let trees = parse_bracketed("(S (NP (DT the) (NN cat)) (VP sat))").unwrap();
        let root = &trees[0];
        let mut concat: Vec<&str> = Vec::new();
        for c in &root.children {
            concat.extend(c.span());
        }
        assert_eq!(root.span(), concat);
        assert_eq!(root.nodes().len(), 8);
    }

    #[test]
    fn unbalanced_input_reports_offset() {
        match parse_bracketed("((a)") {
            Err(Error::TreeParse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected TreeParse, got {other:?}"),
        }
        assert!(parse_bracketed("word").is_err());
        assert!(parse_bracketed("(X)").is_err());
        assert!(parse_bracketed("").is_err());
    }

    #[test]
    fn blank_line_separated_blocks() {
        let text = "(X a)\n\n(S (NP b) (VP c))\n";
        let trees = parse_bracketed(text).unwrap();
        assert_eq!(trees.len(), 2);
        assert_eq!(trees[1].span(), vec!["b", "c"]);
    }

    #[test]
    fn unlabeled_wrapper_is_unwrapped() {
        let trees = parse_bracketed("( (S (NP a) (VP b)) )").unwrap();
        assert_eq!(trees[0].label, "S");
        assert_eq!(trees[0].height(), 2);
    }

    #[test]
    fn render_round_trips() {
        let text = "(S (NP (DT the) (NN cat)) (VP (VBD sat) (PP (IN on) (NP (DT the) (NN mat)))))";
        let trees = parse_bracketed(text).unwrap();
        let again = parse_bracketed(&trees[0].render()).unwrap();
        assert_eq!(trees, again);
    }

    fn arb_tree() -> impl Strategy<Value = ParseNode> {
        let leaf = "[a-z]{1,5}".prop_map(|t| ParseNode::leaf(&t));
        leaf.prop_recursive(4, 24, 4, |inner| {
            ("[A-Z]{1,3}", prop::collection::vec(inner, 1..4)).prop_map(|(label, children)| {
                ParseNode {
                    label,
                    token: None,
                    children,
                }
            })
        })
    }

    proptest! {
        #[test]
        fn random_trees_round_trip(t in arb_tree()) {
            // Top-level terminals aren't valid tree files; wrap them.
            let root = if t.is_leaf() {
                ParseNode { label: "X".into(), token: None, children: vec![t] }
            } else {
                t
            };
            let parsed = parse_bracketed(&root.render()).unwrap();
            prop_assert_eq!(parsed, vec![root]);
        }
    }
}
