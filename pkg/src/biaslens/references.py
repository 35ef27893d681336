"""Published reference points for the bundled metrics.

These values come from large-scale audits of two English corpora: a
collection of 16,426 volumes of 19th-century British fiction, and every
article published online by a UK national newspaper across 2009-2018.
They are orientation points for interpreting audit output on comparable
corpora, not test oracles: reproducing them requires the original corpora,
which cannot ship with this package.
"""

#: Share of female pronouns among all gendered pronouns (presence metric).
NEWS_FEMALE_PRONOUN_SHARE_2009 = 0.20
NEWS_FEMALE_PRONOUN_SHARE_2018 = 0.30

#: Share of the literal token "female" among female/male modifier tokens.
#: In the fiction corpus "female" appears 2.5x as often as "male".
FICTION_FEMALE_MODIFIER_SHARE = 2.5 / 3.5
NEWS_FEMALE_MODIFIER_SHARE_2009 = 0.56
NEWS_FEMALE_MODIFIER_SHARE_2018 = 0.60

#: Mean cosine similarity of the top 20 emotion terms to "women" / "men".
FICTION_EMOTION_MEAN_WOMEN = 0.101
FICTION_EMOTION_MEAN_MEN = 0.056
NEWS_EMOTION_MEAN_WOMEN = 0.078
NEWS_EMOTION_MEAN_MEN = 0.089

#: Aggregate share of male-first orderings among gendered binomials.
FICTION_BINOMIAL_MALE_FIRST_SHARE = 0.87
NEWS_BINOMIAL_MALE_FIRST_SHARE_2009 = 0.78
NEWS_BINOMIAL_MALE_FIRST_SHARE_2018 = 0.74

#: husband/wife male-first shares reported for the two newspaper endpoint
#: years.  The source reports 87% and 84% "respectively for the 2018 and
#: 2009 collections", which reads reversed against the falling aggregate
#: trend; both values are recorded here without a year attribution.
NEWS_HUSBAND_WIFE_MALE_FIRST_SHARES = (0.87, 0.84)

#: top_k used for the association reference means above.
ASSOCIATION_TOP_K = 20
