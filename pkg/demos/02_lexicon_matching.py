#!/usr/bin/env python3
"""Trie matching: from a sentence to its word sequence with head/tail spans."""

from nflat.lexicon import append_non_word, build_trie, match_stats, match_words

# a small Chinese lexicon and the classic overlapping-words sentence
lexicon = ["今天", "天晚", "晚饭", "洗衣", "洗衣机", "微波", "微波炉"]
trie = build_trie(lexicon)

sentence = "今天晚饭后用微波炉"
matches = match_words(trie, sentence)
print(f"sentence: {sentence}")
for m in matches:
    print(f"  word {m.word}  covers characters {m.head}..{m.tail}")

# the auxiliary sentence-spanning word guarantees every character a target,
# even for punctuation or characters outside every match
full = append_non_word(matches, len(sentence))
print(f"word sequence length with auxiliary entry: {len(full)} (m' = m + 1)")

# overlap is kept deliberately: the model weighs alternatives itself
print("\noverlapping latin example:")
trie2 = build_trie(["ab", "bc", "cab"])
for m in match_words(trie2, "abcab"):
    print(f"  {m.word} {m.head} {m.tail}")

# corpus-level match statistics (the quantities behind lexicon sizing)
stats = match_stats([sentence, "今天洗衣", "晚饭"], trie)
print(
    f"\ncorpus stats: char len avg {stats.char_len_avg:.1f} / max {stats.char_len_max},"
    f" matched len avg {stats.matched_len_avg:.1f} / max {stats.matched_len_max}"
)
