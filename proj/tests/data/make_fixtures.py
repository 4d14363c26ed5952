"""Builds the tiny exported-model fixture used by the local backend tests.

Writes tests/data/local_model/ (manifest.json, two ONNX graphs, vocab.json,
merges.txt) and tests/data/tokenizer_expected.json with token ids produced by
the Hugging Face CLIP tokenizer over the same vocabulary.
"""
import json
import pathlib

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper

HERE = pathlib.Path(__file__).resolve().parent
OUT = HERE / "local_model"
DIM = 8

MERGES = [
    ("p", "h"), ("ph", "o"), ("t", "o</w>"), ("pho", "to</w>"),
    ("o", "f</w>"), ("t", "h"), ("th", "e</w>"), ("c", "a"), ("ca", "t</w>"),
    ("d", "o"), ("do", "g</w>"), ("i", "n</w>"), ("'", "s</w>"), ("l", "i"),
]


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


def write_tokenizer():
    chars = list(bytes_to_unicode().values())
    vocab = chars + [c + "</w>" for c in chars] + ["".join(m) for m in MERGES] + ["<|startoftext|>", "<|endoftext|>"]
    (OUT / "vocab.json").write_text(json.dumps({t: i for i, t in enumerate(vocab)}, ensure_ascii=False, indent=0))
    (OUT / "merges.txt").write_text("#version: 0.2\n" + "".join(f"{a} {b}\n" for a, b in MERGES), encoding="utf-8")


def save(graph, path):
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 11)])
    model.ir_version = 6
    onnx.checker.check_model(model)
    onnx.save(model, path)


def write_graphs():
    rng = np.random.default_rng(7)
    w_img = numpy_helper.from_array(rng.standard_normal((3, DIM)).astype(np.float32), "W")
    save(helper.make_graph(
        [helper.make_node("GlobalAveragePool", ["pixel_values"], ["pooled"]),
         helper.make_node("Flatten", ["pooled"], ["flat"], axis=1),
         helper.make_node("MatMul", ["flat", "W"], ["image_embeds"])],
        "image_encoder",
        [helper.make_tensor_value_info("pixel_values", TensorProto.FLOAT, [1, 3, 224, 224])],
        [helper.make_tensor_value_info("image_embeds", TensorProto.FLOAT, [1, DIM])], [w_img]),
        OUT / "image.onnx")
    # Token ids arrive as floats; a fixed projection stands in for the encoder.
    w_txt = numpy_helper.from_array((rng.standard_normal((77, DIM)) * 1e-3).astype(np.float32), "W")
    b_txt = numpy_helper.from_array(rng.standard_normal((1, DIM)).astype(np.float32), "B")
    save(helper.make_graph(
        [helper.make_node("MatMul", ["input_ids", "W"], ["proj"]),
         helper.make_node("Add", ["proj", "B"], ["text_embeds"])],
        "text_encoder",
        [helper.make_tensor_value_info("input_ids", TensorProto.FLOAT, [1, 77])],
        [helper.make_tensor_value_info("text_embeds", TensorProto.FLOAT, [1, DIM])], [w_txt, b_txt]),
        OUT / "text.onnx")


def write_manifest():
    manifest = {
        "model_id": "fixture-tiny",
        "dim": DIM,
        "files": {
            "image_encoder": "image.onnx",
            "text_encoder": "text.onnx",
            "tokenizer_vocab": "vocab.json",
            "tokenizer_merges": "merges.txt",
        },
        "preprocess_id": "clip-224-bicubic",
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def write_expected_ids():
    from transformers import CLIPTokenizer

    tok = CLIPTokenizer(str(OUT / "vocab.json"), str(OUT / "merges.txt"))
    texts = [
        "A photo of a cat",
        "the dog's toy",
        "A   PHOTO of THE   dog",
        "photo photo, photo!",
        "lion in 2024 with 3 dogs",
        "a photo of a hot-dog...",
        "",
    ]
    cases = [{"text": t, "ids": tok(t)["input_ids"]} for t in texts]
    (HERE / "tokenizer_expected.json").write_text(json.dumps(cases, indent=1) + "\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    write_tokenizer()
    write_graphs()
    write_manifest()
    write_expected_ids()
