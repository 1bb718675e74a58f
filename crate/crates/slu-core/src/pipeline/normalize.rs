//! Token normalization: lowercase everything and collapse digit-run tokens
//! into the special "#" token.

pub const DIGIT_TOKEN: &str = "#";

pub fn normalize_token(token: &str) -> String {
    if !token.is_empty() && token.chars().all(|c| c.is_ascii_digit()) {
        DIGIT_TOKEN.to_string()
    } else {
        token.to_lowercase()
    }
}

pub fn normalize(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| normalize_token(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn digit_runs_become_hash() {
        assert_eq!(normalize(&toks(&["6", ":", "00", "pm"])), toks(&["#", ":", "#", "pm"]));
    }

    #[test]
    fn plain_words_unchanged() {
        assert_eq!(normalize(&toks(&["hello"])), toks(&["hello"]));
    }

    #[test]
    fn lowercases_and_keeps_mixed_tokens() {
        assert_eq!(
            normalize(&toks(&["AMC", "newpark", "12"])),
            toks(&["amc", "newpark", "#"])
        );
        // Mixed alphanumerics are not digit runs.
        assert_eq!(normalize(&toks(&["4:45pm"])), toks(&["4:45pm"]));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(tokens in proptest::collection::vec("[a-zA-Z0-9#:]{0,8}", 0..20)) {
            let once = normalize(&tokens);
            prop_assert_eq!(normalize(&once), once.clone());
        }
    }
}
