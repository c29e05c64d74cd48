# # Ranking keyphrases in the bundled samples
#
# A walk through one extraction run on the three sample documents that ship
# with the package.  The scoring backbone here is the deterministic stub, so
# the numbers are reproducible but carry no linguistic meaning.  Swap in
# `make_backbone("t5-base", "encoder_decoder")` for real scores.

# In[1]:

from importlib import resources

from contextkp import Extractor, StubBackbone, f1_at_k, load_config, load_dataset
from contextkp.candidates import generate_candidates

data = resources.files("contextkp") / "data"
docs = load_dataset(data / "samples.jsonl")
config = load_config(data / "example_config.yaml")
print([d.id for d in docs])

# Candidates are noun-phrase chunks.  Every occurrence is kept separately,
# together with its sentence and character span.

# In[2]:

doc = docs[0]
for occ in generate_candidates(doc)[:8]:
    print(f"{occ.sentence_index:2d} {occ.char_span!s:12} {occ.surface!r:28} -> {occ.stemmed}")

# In[3]:

extractor = Extractor(StubBackbone(), config)
result = extractor.extract(doc)
for c in result.ranked[:10]:
    print(f"{c.score:9.4f}  {c.surface}")

# The score of a phrase is the best score among its occurrences.  Comparing
# the top of the list with the gold phrases:

# In[4]:

predicted = [c.stemmed for c in result.ranked]
for k in (5, 10, 15):
    print(k, f1_at_k(predicted, doc.gold_stemmed, k))

# Time per step accumulates on the extractor across documents.

# In[5]:

for d in docs[1:]:
    extractor.extract(d)
print({step: round(t, 3) for step, t in extractor.timings.items()})
