# # Ablations, layer choice and topic drift
#
# The same candidates are scored under every ablation mode, so differences
# between rows come only from the scoring change.

# In[1]:

from importlib import resources

from contextkp import StubBackbone, load_config, load_dataset
from contextkp.evaluation import HashingEmbedder, layer_sweep, run_ablation, similarity_bin_recall, topic_drift
from contextkp.pipeline import Extractor

data = resources.files("contextkp") / "data"
docs = load_dataset(data / "samples.jsonl")
extractor = Extractor(StubBackbone(), load_config(data / "example_config.yaml"))

reports = run_ablation(extractor, docs, ks=[5, 15], dataset="samples")
print("".join(r.to_csv(header=i == 0) for i, r in enumerate(reports.values())))

# Which self-attention layer feeds the saliency scores:

# In[2]:

sweep = layer_sweep(extractor, docs, [0, 1], ks=[15], dataset="samples")
print("".join(r.to_csv(header=i == 0) for i, r in enumerate(sweep.values())))

# Topic drift compares every pair of three-sentence units.  Higher means the
# document wanders more.

# In[3]:

embedder = HashingEmbedder()
for d in docs:
    r = topic_drift(d, embedder)
    print(f"{d.id:18} units={r.units} drift={r.value:.3f}")

# Recall split by how close each gold phrase sits to its document, with the
# unweighted baseline for comparison.

# In[4]:

full = {d.id: [c.stemmed for c in extractor.extract(d).ranked] for d in docs}
baseline_extractor = Extractor(extractor.backbone, extractor.config.replace(weighting_mode="off", attention_mode="off", lam=0.0))
baseline = {d.id: [c.stemmed for c in baseline_extractor.extract(d).ranked] for d in docs}
print(similarity_bin_recall(docs, full, embedder, k=15, baseline=baseline).to_csv())
