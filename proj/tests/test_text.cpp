#include <gtest/gtest.h>

#include "starqa/text.hpp"

using starqa::text::tokenize;
using starqa::text::tokenize_path_text;
using Tokens = std::vector<std::string>;

TEST(Tokenize, StripsEdgePunctuationKeepsCurrency) {
  EXPECT_EQ(tokenize("The fee is $300."), (Tokens{"the", "fee", "is", "$300"}));
}

TEST(Tokenize, EmptyInput) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("  \t\n ").empty());
  EXPECT_TRUE(tokenize("... , !").empty());
}

TEST(Tokenize, InnerHyphenKept) { EXPECT_EQ(tokenize("ACL-2023, Toronto"), (Tokens{"acl-2023", "toronto"})); }

TEST(Tokenize, UnicodeWhitespaceSplits) {
  // U+00A0 no-break space and U+3000 ideographic space.
  EXPECT_EQ(tokenize("June\xC2\xA0" "1\xE3\x80\x80" "2023"), (Tokens{"june", "1", "2023"}));
}

TEST(Tokenize, CurlyQuotesStripped) {
  EXPECT_EQ(tokenize("\xE2\x80\x9CHello\xE2\x80\x9D"), (Tokens{"hello"}));
}

TEST(Tokenize, NonAsciiBytesPreserved) { EXPECT_EQ(tokenize("Z\xC3\xBCrich"), (Tokens{"z\xC3\xBCrich"})); }

TEST(Tokenize, PathSeparatorIsWhitespaceForPathText) {
  EXPECT_EQ(tokenize_path_text("WWW2023>>ACM Members>>$300"), (Tokens{"www2023", "acm", "members", "$300"}));
  EXPECT_EQ(tokenize("a>>b"), (Tokens{"a>>b"}));
}

TEST(Text, TruncateForPrompt) {
  EXPECT_EQ(starqa::text::truncate_for_prompt("abcdef", 3), "abc...");
  EXPECT_EQ(starqa::text::truncate_for_prompt("abc", 3), "abc");
  // Counts code points, never splits one.
  EXPECT_EQ(starqa::text::truncate_for_prompt("\xC3\xBC\xC3\xBC\xC3\xBC", 2), "\xC3\xBC\xC3\xBC...");
}

TEST(Text, CollapseWhitespace) {
  EXPECT_EQ(starqa::text::collapse_whitespace("  a \n\t b  "), "a b");
  EXPECT_EQ(starqa::text::trim("\xC2\xA0 x y \n"), "x y");
}
