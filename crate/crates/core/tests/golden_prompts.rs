use warc2meta::llm::{build_prompt, PromptVariant, CATALOGUER_PROMPT, SUMMARY_RULES};

const WITHOUT_RULES: &str = include_str!("golden/prompt_without_rules.txt");
const WITH_RULES: &str = include_str!("golden/prompt_with_rules.txt");

fn strip_final_newline(s: &str) -> &str {
    s.strip_suffix('\n').expect("golden files end with a newline")
}

#[test]
fn system_prompts_match_golden_files_byte_for_byte() {
    assert_eq!(PromptVariant::NoRules.system_text(), strip_final_newline(WITHOUT_RULES));
    assert_eq!(PromptVariant::Rules.system_text(), strip_final_newline(WITH_RULES));
}

#[test]
fn rules_variant_is_base_prompt_plus_rules() {
    assert_eq!(PromptVariant::Rules.system_text(), format!("{CATALOGUER_PROMPT}\n\n{SUMMARY_RULES}"));
    assert_eq!(PromptVariant::NoRules.system_text(), CATALOGUER_PROMPT);
    assert!(strip_final_newline(WITH_RULES).starts_with(strip_final_newline(WITHOUT_RULES)));
}

#[test]
fn prompt_text_keeps_typographic_characters() {
    assert!(SUMMARY_RULES.contains("company’s name"));
    assert!(!CATALOGUER_PROMPT.contains('\r'));
    assert!(CATALOGUER_PROMPT.contains("{'title': [inferred_title], 'abstract': [created_abstract]}"));
}

#[test]
fn messages_carry_the_exact_system_text() {
    for variant in PromptVariant::ALL {
        let messages = build_prompt(variant, "content", "https://acme.sg/").unwrap();
        assert_eq!(messages[0].content, variant.system_text());
        let json = serde_json::to_value(&messages).unwrap();
        assert_eq!(json[0]["role"], "system");
        assert_eq!(json[1]["role"], "user");
        assert_eq!(json[0]["content"].as_str().unwrap(), variant.system_text());
    }
}
