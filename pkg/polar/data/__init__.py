from .corpus import Corpus, load_corpus, save_corpus
from .evaluate import EvalReport, evaluate
from .synthetic import GeneratorSpec, gen_synthetic, split_corpus
