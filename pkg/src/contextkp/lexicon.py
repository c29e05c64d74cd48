"""Deterministic lexicon + suffix-rule POS tagger (Penn tag set).

Good enough to drive noun-phrase chunking on clean English prose without any
downloaded model.  Any object with a ``tag(words) -> list[str]`` method can
replace it.
"""

from __future__ import annotations

import re
from typing import Sequence


def _words(tag: str, text: str) -> dict[str, str]:
    return {w: tag for w in text.split()}


LEXICON: dict[str, str] = {}
LEXICON.update(_words("DT", "a an the this that these those every each some any no another either neither all both half"))
LEXICON.update(_words("PRP", "i you he she it we they me him her us them myself yourself himself herself itself ourselves themselves"))
LEXICON.update(_words("PRP$", "my your his its our their"))
LEXICON.update(_words("IN", """
    of in on at by for with about against between into through during before after above below to from up
    down out off over under again further then once than because while although though whether if since
    until unless upon within without among across along around behind beyond despite toward towards via
    per like near onto amid throughout inside outside underneath
"""))
LEXICON["to"] = "TO"
LEXICON.update(_words("CC", "and or but nor yet plus"))
LEXICON.update(_words("MD", "can could may might must shall should will would"))
LEXICON.update(_words("WDT", "which whatever whichever"))
LEXICON.update(_words("WP", "who whom what whoever"))
LEXICON.update(_words("WRB", "when where why how wherever whenever"))
LEXICON.update(_words("EX", "there"))
LEXICON.update(_words("RB", """
    not n't also very too so just only even still already always never often sometimes usually quickly
    here now then however therefore thus perhaps rather quite almost instead again ago soon later once
    yesterday today tomorrow away back ever further moreover meanwhile nevertheless otherwise indeed
    finally mostly nearly roughly largely widely recently currently simply
"""))
LEXICON.update(_words("VBZ", "is has does says goes makes gets"))
LEXICON.update(_words("VBP", "are am have do"))
LEXICON.update(_words("VBD", """
    was were had did said made went took came saw found gave told became left felt brought began kept held
    wrote stood heard meant met ran paid sat spoke lay led grew lost fell sent built understood drew broke
    spent rose drove bought wore chose fought threw caught sold won struck taught hit
"""))
LEXICON.update(_words("VBN", "been done gone taken seen given known shown written begun chosen driven grown thrown"))
LEXICON.update(_words("VBG", "being having doing"))
LEXICON.update(_words("VB", """
    be have do say make go take come see know get give find think tell become leave feel bring begin keep
    hold write stand hear let mean set meet run pay sit speak lie lead read grow lose fall send build
    understand draw break spend cut rise drive buy wear choose seek throw catch deal win forget teach
    use try ask need want look help show play move live believe allow add provide sell require report
    remain suggest raise pass consider appear expect serve die continue include improve reduce avoid
    propose extract rank evaluate compute apply obtain achieve capture identify remove learn worry
    disturb discuss welcome feed bake stretch fold mix turn start become
"""))
LEXICON.update(_words("JJ", """
    new old good bad great small large big long short high low little own other same different important
    public able free full sure clear real best better whole major local global early late young hard easy
    strong possible certain recent national international human social political economic general
    special simple common likely fast slow hot cold warm dark light deep wide main key final open past
    previous next several many much few more most less least such various whole entire single multiple
    additional available current potential significant semantic contextual lexical unsupervised
    supervised neural linguistic empirical statistical novel robust specific fine broad red blue green
    black white free safe severe heavy rich poor private daily annual federal natural medical legal
    environmental financial northern southern eastern western central clean tight loose dry wet fresh
    higher lower larger smaller greater wider older newer earlier later faster slower stronger weaker
    first second third fourth fifth sixth seventh eighth ninth tenth last
"""))
LEXICON.update(_words("NN", """
    time year people way day man thing woman life child world school state family student group country
    problem hand part place case week company system program question work government number night point
    home water room mother area money story fact month lot right study book eye job word business issue
    side kind head house service friend father power hour game line end member law car city community
    name president team minute idea kid body information back parent face others level office door
    health person art war history party result change morning reason research girl guy moment air
    teacher force education oil spill cleanup model attention document sentence candidate keyphrase
    phrase token layer window weight score text data method approach task marathon race runner
    proposal signal animal hospital capital material official total festival interval journal
    """))
LEXICON.update(_words("CD", """
    one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen sixteen
    seventeen eighteen nineteen twenty thirty forty fifty sixty seventy eighty ninety hundred thousand
    million billion
"""))

_JJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ical", "ish", "ary", "ant", "ent", "ic", "al")
_NUMBER_RE = re.compile(r"^[+-]?\d[\d,.]*%?$")
_PUNCT = {".": ".", "!": ".", "?": ".", ",": ",", ":": ":", ";": ":", "(": "(", ")": ")", "'s": "POS", "’s": "POS"}


class LexiconTagger:
    """Lexicon lookup, then suffix heuristics, then a few contextual fixes."""

    def __init__(self, lexicon: dict[str, str] | None = None):
        self.lexicon = LEXICON if lexicon is None else lexicon

    def _base_tag(self, word: str, first: bool) -> str:
        low = word.lower()
        if word in _PUNCT:
            return _PUNCT[word]
        if _NUMBER_RE.match(word):
            return "CD"
        if not any(ch.isalnum() for ch in word):
            return "SYM"
        if low in self.lexicon:
            tag = self.lexicon[low]
            if word[0].isupper() and not first and tag in ("NN", "JJ"):
                return "NNP"
            return tag
        if word[0].isupper() and (not first or word.isupper()):
            return "NNPS" if word.endswith("s") and not word.isupper() and len(word) > 4 else "NNP"
        if low.endswith("ly") and len(low) > 4:
            return "RB"
        if low.endswith("ing") and len(low) > 5:
            return "VBG"
        if low.endswith("ed") and len(low) > 4:
            return "VBN"
        if len(low) > 4 and low.endswith(_JJ_SUFFIXES) and not low.endswith(("ment", "ance", "ence")):
            return "JJ"
        if low.endswith("s") and len(low) > 3 and not low.endswith(("ss", "us", "is")):
            singular = low[:-1]
            if singular in self.lexicon and self.lexicon[singular] == "VB":
                return "VBZ"
            return "NNS"
        if first and word[0].isupper():
            return "NNP"
        return "NN"

    def tag(self, words: Sequence[str]) -> list[str]:
        tags = [self._base_tag(w, i == 0) for i, w in enumerate(words)]
        # "Mix the dough": capitalised unknown word opening an imperative
        if len(tags) > 1 and tags[0] == "NNP" and words[0].lower() not in self.lexicon and tags[1] in ("DT", "PRP$", "PRP"):
            tags[0] = "VB"
        for i in range(1, len(tags)):
            prev = tags[i - 1]
            prev_low = words[i - 1].lower()
            nxt = tags[i + 1] if i + 1 < len(tags) else None
            # "to run", "will run": base verb after TO / modal
            if prev in ("TO", "MD") and tags[i] in ("NN", "VB") and words[i].islower() and nxt != "POS":
                tags[i] = "VB"
            # "the running", "a proposed": participle directly after determiner
            elif prev in ("DT", "PRP$") and tags[i] == "VBG" and nxt not in ("NN", "NNS"):
                tags[i] = "NN"
            elif prev in ("DT", "PRP$", "JJ") and tags[i] in ("VBN", "VBG") and nxt is not None and nxt.startswith("NN"):
                tags[i] = "JJ"
            elif prev in ("DT", "JJ", "PRP$") and tags[i] == "VB":
                tags[i] = "NN"
            # "that preserves the", "often suffers from": -s verb after a relative pronoun or adverb
            elif tags[i] == "NNS" and (prev_low in ("that", "which", "who") or prev == "RB") and nxt in ("DT", "IN", "JJ", "NN", "PRP$", "PRP"):
                tags[i] = "VBZ"
        return tags
