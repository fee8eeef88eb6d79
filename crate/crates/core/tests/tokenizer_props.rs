use proptest::prelude::*;
use toxishield_core::tokenizer::{tokenize, wordpiece_split, Vocab, DEFAULT_MAX_LEN};

const WORDS: [&str; 12] = ["fix", "the", "loop", "un", "##able", "##s", "test", "slow", "naïve", "code", "review", "ok"];

fn vocab() -> Vocab {
    Vocab::from_tokens(["[PAD]", "[UNK]", "[CLS]", "[SEP]", ",", ".", "!", "?"].into_iter().chain(WORDS)).unwrap()
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![
            prop::sample::select(WORDS.to_vec()).prop_map(|w| w.trim_start_matches("##").to_string()),
            "[a-zA-Z]{1,8}",
            Just("unable".to_string()),
            Just("tests".to_string()),
            Just("!".to_string()),
            Just("Naïve".to_string()),
            Just("🙃".to_string()),
        ],
        1..200,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_output_has_max_len(words in sentence(), max_len in 3usize..160) {
        let seq = tokenize(&words.join(" "), &vocab(), max_len).unwrap();
        prop_assert_eq!(seq.ids.len(), max_len);
        prop_assert_eq!(seq.attention_mask.len(), max_len);
        prop_assert_eq!(seq.attention_mask.iter().filter(|&&m| m == 1).count(), seq.length);
        prop_assert!(seq.length >= 3 && seq.length <= max_len);
        prop_assert_eq!(seq.ids[0], vocab().cls_id());
        prop_assert_eq!(seq.ids[seq.length - 1], vocab().sep_id());
        prop_assert!(seq.ids[seq.length..].iter().all(|&id| id == vocab().pad_id()));
    }

    #[test]
    fn deterministic_across_calls_and_threads(words in sentence()) {
        let text = words.join(" ");
        let v = vocab();
        let first = tokenize(&text, &v, DEFAULT_MAX_LEN).unwrap();
        let from_threads: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..4).map(|_| s.spawn(|| tokenize(&text, &v, DEFAULT_MAX_LEN).unwrap())).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for seq in from_threads {
            prop_assert_eq!(&seq, &first);
        }
    }

    #[test]
    fn prefix_text_gives_prefix_tokens(words in sentence(), cut in 0usize..200) {
        let v = vocab();
        let cut = cut.min(words.len() - 1) + 1;
        let full = tokenize(&words.join(" "), &v, DEFAULT_MAX_LEN).unwrap();
        let prefix = tokenize(&words[..cut].join(" "), &v, DEFAULT_MAX_LEN).unwrap();
        let (f, p) = (full.content_ids(), prefix.content_ids());
        prop_assert!(p.len() <= f.len());
        prop_assert_eq!(p, &f[..p.len()]);
    }

    #[test]
    fn covered_short_inputs_round_trip(idx in prop::collection::vec(0usize..6, 1..40)) {
        let words = ["fix", "the", "loop", "unable", "tests", "code"];
        let text: Vec<&str> = idx.iter().map(|&i| words[i]).collect();
        let v = vocab();
        let seq = tokenize(&text.join(" "), &v, DEFAULT_MAX_LEN).unwrap();
        prop_assert_eq!(v.decode_words(seq.content_ids()), text.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    }

    #[test]
    fn wordpiece_pieces_concatenate_to_the_word(word in "(un|fix|loop|test|able|s){1,5}") {
        let v = vocab();
        let pieces = wordpiece_split(&word, &v);
        if pieces != ["[UNK]"] {
            let joined: String = pieces.iter().map(|p| p.trim_start_matches("##")).collect();
            prop_assert_eq!(joined, word);
            prop_assert!(pieces.iter().skip(1).all(|p| p.starts_with("##")));
        }
    }
}

#[test]
fn three_hundred_words_truncate_to_126() {
    let words: Vec<String> = (0..300).map(|i| format!("tok{i}")).collect();
    let v = Vocab::from_tokens(["[PAD]", "[UNK]", "[CLS]", "[SEP]"].iter().map(|s| s.to_string()).chain(words.clone()))
        .unwrap();
    let seq = tokenize(&words.join(" "), &v, 128).unwrap();
    assert_eq!(seq.content_ids().len(), 126);
    assert_eq!(seq.attention_mask.iter().map(|&m| m as usize).sum::<usize>(), 128);
    assert_eq!(v.token(seq.content_ids()[125]), Some("tok125"));
}

#[test]
fn vocab_file_line_numbers_are_ids() {
    let dir = std::env::temp_dir().join(format!("toxishield-vocab-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("vocab.txt");
    std::fs::write(&path, "[PAD]\n[UNK]\n[CLS]\n[SEP]\nhello\n##s\n").unwrap();
    let v = Vocab::load(&path).unwrap();
    assert_eq!(v.id("hello"), Some(4));
    assert_eq!(v.id("##s"), Some(5));
    let seq = tokenize("Hellos", &v, 8).unwrap();
    assert_eq!(seq.ids, [2, 4, 5, 3, 0, 0, 0, 0]);
    std::fs::remove_dir_all(dir).unwrap();
}
