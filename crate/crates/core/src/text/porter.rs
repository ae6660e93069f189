//! Porter's suffix-stripping stemmer, following the published five-step
//! algorithm (no later revisions: `abli -> able`, no `logi` rule, and
//! two-letter words are stemmed like any other).

/// Stem a lowercase ASCII word. Non-lowercase input is returned unchanged.
pub fn stem(word: &str) -> String {
    if word.is_empty() || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut s = Stemmer { b: word.as_bytes().to_vec() };
    s.step1a();
    s.step1b();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5a();
    s.step5b();
    String::from_utf8(s.b).expect("ascii in, ascii out")
}

struct Stemmer {
    b: Vec<u8>,
}

impl Stemmer {
    fn is_cons(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_cons(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `b[..k]`.
    fn measure(&self, k: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        while i < k && self.is_cons(i) {
            i += 1;
        }
        loop {
            while i < k && !self.is_cons(i) {
                i += 1;
            }
            if i >= k {
                return m;
            }
            while i < k && self.is_cons(i) {
                i += 1;
            }
            m += 1;
            if i >= k {
                return m;
            }
        }
    }

    fn has_vowel(&self, k: usize) -> bool {
        (0..k).any(|i| !self.is_cons(i))
    }

    fn double_cons(&self, k: usize) -> bool {
        k >= 2 && self.b[k - 1] == self.b[k - 2] && self.is_cons(k - 1)
    }

    /// `*o`: stem ends consonant-vowel-consonant, last not w, x or y.
    fn cvc(&self, k: usize) -> bool {
        k >= 3
            && self.is_cons(k - 3)
            && !self.is_cons(k - 2)
            && self.is_cons(k - 1)
            && !matches!(self.b[k - 1], b'w' | b'x' | b'y')
    }

    fn ends(&self, suffix: &str) -> bool {
        self.b.ends_with(suffix.as_bytes())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.b.len() - suffix.len()
    }

    fn replace(&mut self, suffix: &str, with: &str) {
        let k = self.stem_len(suffix);
        self.b.truncate(k);
        self.b.extend_from_slice(with.as_bytes());
    }

    /// Apply the first rule whose suffix matches, if its measure condition holds.
    /// Rules are ordered so that the first match is the longest.
    fn apply_rules(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        for &(suffix, with) in rules {
            if self.ends(suffix) {
                if self.measure(self.stem_len(suffix)) > min_measure {
                    self.replace(suffix, with);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        if self.ends("sses") {
            self.replace("sses", "ss");
        } else if self.ends("ies") {
            self.replace("ies", "i");
        } else if self.ends("ss") {
        } else if self.ends("s") {
            self.replace("s", "");
        }
    }

    fn step1b(&mut self) {
        if self.ends("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.replace("eed", "ee");
            }
            return;
        }
        let removed = ["ed", "ing"]
            .into_iter()
            .find(|suf| self.ends(suf) && self.has_vowel(self.stem_len(suf)));
        let Some(suffix) = removed else { return };
        self.replace(suffix, "");

        if self.ends("at") || self.ends("bl") || self.ends("iz") {
            self.b.push(b'e');
        } else if self.double_cons(self.b.len()) && !matches!(self.b[self.b.len() - 1], b'l' | b's' | b'z') {
            self.b.pop();
        } else if self.measure(self.b.len()) == 1 && self.cvc(self.b.len()) {
            self.b.push(b'e');
        }
    }

    fn step1c(&mut self) {
        if self.ends("y") && self.has_vowel(self.stem_len("y")) {
            self.replace("y", "i");
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        // "ational" must win over "tional", and "ization" over "ation"; check
        // the longest matching suffix first.
        self.apply_longest(RULES, 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_longest(RULES, 0);
    }

    fn step4(&mut self) {
        const SUFFIXES: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou",
            "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        let Some(suffix) = SUFFIXES
            .iter()
            .filter(|s| self.ends(s))
            .max_by_key(|s| s.len())
            .copied()
        else {
            return;
        };
        let k = self.stem_len(suffix);
        if self.measure(k) <= 1 {
            return;
        }
        if suffix == "ion" && !(k > 0 && matches!(self.b[k - 1], b's' | b't')) {
            return;
        }
        self.b.truncate(k);
    }

    fn step5a(&mut self) {
        if !self.ends("e") {
            return;
        }
        let k = self.b.len() - 1;
        let m = self.measure(k);
        if m > 1 || (m == 1 && !self.cvc(k)) {
            self.b.pop();
        }
    }

    fn step5b(&mut self) {
        let k = self.b.len();
        if self.measure(k) > 1 && self.double_cons(k) && self.b[k - 1] == b'l' {
            self.b.pop();
        }
    }

    fn apply_longest(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        let best = rules
            .iter()
            .filter(|(suf, _)| self.ends(suf))
            .max_by_key(|(suf, _)| suf.len())
            .copied();
        if let Some(rule) = best {
            self.apply_rules(&[rule], min_measure);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::stem;

    #[test]
    fn clinical_stems() {
        assert_eq!(stem("surgical"), "surgic");
        assert_eq!(stem("dressing"), "dress");
        assert_eq!(stem("dexamethasone"), "dexamethason");
        assert_eq!(stem("hypoxic"), "hypox");
        assert_eq!(stem("hypoxia"), "hypoxia");
        assert_eq!(stem("remdesivir"), "remdesivir");
    }

    #[test]
    fn classic_examples() {
        let cases = [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("hopping", "hop"),
            ("falling", "fall"),
            ("hissing", "hiss"),
            ("fizzed", "fizz"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("generalizations", "gener"),
            ("oscillators", "oscil"),
            ("controlling", "control"),
            ("rolling", "roll"),
            ("adjustment", "adjust"),
            ("adoption", "adopt"),
        ];
        for (w, s) in cases {
            assert_eq!(stem(w), s, "{w}");
        }
    }

    #[test]
    fn two_letter_words_are_stemmed() {
        assert_eq!(stem("as"), "a");
        assert_eq!(stem("pt"), "pt");
    }

    #[test]
    fn non_lowercase_passthrough() {
        assert_eq!(stem("COVID"), "COVID");
        assert_eq!(stem(""), "");
    }
}
