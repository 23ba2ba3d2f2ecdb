from __future__ import annotations

import json
import string

import pytest
import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> str:
    """A miniature random-weight transformer saved to disk.

    Hub downloads are unavailable in the test environment, so the exporter
    is exercised through the same from_pretrained path with a local
    checkpoint directory. Character-level wordpieces keep the vocabulary
    tiny while still giving different texts different token sequences.
    """
    directory = tmp_path_factory.mktemp("tiny-bert")

    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    pieces = list(string.ascii_lowercase) + list(string.digits)
    pieces += ["##" + c for c in string.ascii_lowercase]
    pieces += ["##" + c for c in string.digits]
    vocab = {tok: i for i, tok in enumerate(specials + pieces)}
    wordpiece = Tokenizer(
        models.WordPiece(vocab=vocab, unk_token="[UNK]", max_input_chars_per_word=64)
    )
    wordpiece.normalizer = normalizers.Lowercase()
    wordpiece.pre_tokenizer = pre_tokenizers.Whitespace()
    wordpiece.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=wordpiece,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
    )
    model = BertModel(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def records_100(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("records") / "hundred.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for i in range(100):
            fh.write(
                json.dumps(
                    {
                        "id": f"rec{i:03d}",
                        "source": f"question number {i} about topic {i % 7}",
                        "target": f"answer {i}",
                    }
                )
                + "\n"
            )
    return str(path)
