#pragma once

#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gazelab/layers.hpp"

namespace gazelab {

// A named group of layers. Freezing, SGD masking and serialization all work
// at branch granularity.
struct Branch {
    std::string name;
    std::vector<Layer> layers;
};

// Immutable-by-convention parameter snapshot: training code never mutates a
// ParamSet it was given, it produces updated copies via sgd_update.
struct ParamSet {
    std::vector<Branch> branches;

    Branch* find(std::string_view name);
    const Branch* find(std::string_view name) const;
    std::size_t tensor_count() const;
    std::size_t param_count() const;
    bool same_structure(const ParamSet& o) const;
    bool branch_bit_equal(const ParamSet& o, std::string_view branch) const;
    bool bit_equal(const ParamSet& o) const;
    bool all_finite() const;

    void for_each_tensor(const std::function<void(Tensor&)>& fn);
    void for_each_tensor(const std::function<void(const Tensor&)>& fn) const;
};

// Same structure as `params`, every tensor zeroed. Used as a gradient
// accumulator.
ParamSet zero_like(const ParamSet& params);

// acc += scale * g, elementwise over every tensor.
void accumulate(ParamSet& acc, const ParamSet& g, double scale);

void scale_params(ParamSet& p, double s);

// p <- p - lr*g for tensors in branches listed in branch_mask; all other
// branches are returned bit-identical. Throws on an empty mask, an unknown
// branch name, or a structural mismatch between params and grads.
ParamSet sgd_update(const ParamSet& params, const ParamSet& grads, double lr,
                    const std::set<std::string>& branch_mask);

// Sequential single-input chain. With tape != nullptr, records the input of
// every layer for the backward pass.
Tensor run_branch(const Branch& branch, Tensor input, std::vector<Tensor>* tape);

// Propagates grad_out back through the chain, accumulating parameter
// gradients into grad_accum (same layer structure). Returns the gradient at
// the branch input.
Tensor run_branch_backward(const Branch& branch, const std::vector<Tensor>& tape,
                           Tensor grad_out, Branch& grad_accum);

}  // namespace gazelab
