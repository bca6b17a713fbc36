"""Description embeddings and the binary interchange file that carries them
(and any externally computed embeddings) between pipeline stages.

Run: python demos/04_text_encoding.py
"""

import tempfile
from pathlib import Path

import numpy as np

from scenedesc.io_formats import FileKind, read_embedding_file, write_embedding_file
from scenedesc.text_encoding import MockTextEncoder, mock_text_encode

# The mock encoder hashes character trigrams with FNV-1a: deterministic,
# unit-norm, and platform-stable. Real sentence encoders are plugged in via
# the TextEncoder protocol or precomputed interchange files.
a = mock_text_encode("The curtain is covering the window.")
b = mock_text_encode("The curtain is covering the window.")
c = mock_text_encode("There is a lamp on the table.")
print("vector dim:", a.shape[0])
print("identical text, identical vector:", np.array_equal(a, b))
print("norm:", np.linalg.norm(a))
print("cosine to a different sentence:", round(float(a @ c), 4))

# Vectors travel as little-endian float32 records:
#   "D3DE" | version u16 | kind u8 | dim u32 | count u32 | (index u32, floats)*
encoder = MockTextEncoder(dim=128)
vectors = {
    0: encoder.encode("a wooden table"),
    1: encoder.encode("a red chair near the table"),
}
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "text.d3de"
    write_embedding_file(path, FileKind.TEXT, 128, vectors)
    header, loaded = read_embedding_file(path)
    print("\nwrote", path.stat().st_size, "bytes;",
          f"kind={header.kind.name} dim={header.dim} count={header.count}")
    same = all(
        loaded[i].tobytes() == np.asarray(vectors[i], dtype=np.float32).tobytes()
        for i in vectors
    )
    print("round trip bit-exact:", same)
