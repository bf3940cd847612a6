"""Reduced words, balls in the Cayley graph and the split used by the linearization."""

from covergap.free_group import ball, ball_size, inv, mul, reduce_word, split_support

# words are tuples of signed generator indices; () is the identity
w = reduce_word([1, 2, -2, -1, 2])
print("reduced:", w, " inverse:", inv(w), " product:", mul(w, inv(w)))

for l in range(5):
    print(f"|B_{l}| = {len(ball(2, l))} (closed form {ball_size(2, l)})")

S = ball(2, 4)
S1 = split_support(S, 4)
print(f"ball of radius 4 has {len(S)} words; its half-length split has {len(S1)}")
