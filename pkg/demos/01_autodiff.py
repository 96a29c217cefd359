# Reverse-mode differentiation with seqlm.autodiff
#
# Every operation returns a Node that remembers how to push gradients back
# to its inputs. Graphs are built on the fly, one per sentence in the tagger.
import numpy as np

from seqlm import autodiff as ad

# A leaf is a trainable input. Its gradient buffer starts at zero.
x = ad.leaf(np.array([0.5, -1.0, 2.0]), name="x")
W = ad.leaf(np.arange(6.0).reshape(2, 3) / 10, name="W")

# loss = -log softmax(W x)[1]
logits = ad.matmul(W, x)
loss = ad.scale(ad.pick(ad.log_softmax(logits), 1), -1.0)
print("loss", float(loss.value))

ad.backward(loss)
print("dloss/dx", x.grad)
print("dloss/dW\n", W.grad)

# The gradient of the logits is softmax(logits) - onehot(1), so dW is its
# outer product with x. Check by hand:
p = np.exp(logits.value) / np.exp(logits.value).sum()
print("by hand\n", np.outer(p - np.eye(2)[1], x.value))

# Gradients accumulate until zeroed; a second backward pass doubles them.
ad.backward(loss)
print("after two passes", x.grad)
ad.zero_grad([x, W])

# grad_check compares every entry against central differences and reports
# the largest relative error.
err = ad.grad_check(lambda: ad.logsumexp(ad.tanh(ad.matmul(W, x))), [x, W])
print(f"max relative error {err:.2e}")

# Op counting shows what a forward pass touched.
with ad.count_ops() as counter:
    ad.sigmoid(ad.matmul(W, x))
print(dict(counter.ops), dict(counter.params_read))
