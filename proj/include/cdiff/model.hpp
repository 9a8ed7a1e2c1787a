#pragma once

#include <cstdint>
#include <string>

#include "cdiff/error.hpp"

namespace cdiff {

// Which of the two denoisers consumes the other's fresh output during
// sampling. `independent` severs the cross inputs entirely (the type
// denoiser never sees times, the time denoiser never sees types).
enum class Order { type_first, time_first, independent };

std::string order_name(Order o);
Order order_from_name(const std::string& name);

struct ModelConfig {
    int embed_dim = 16;       // base embedding size; token width is 4x this
    int num_heads = 2;
    int num_layers = 1;
    int ff_dim = 32;
    int num_types = 5;
    int horizon = 20;         // events generated per sample
    int diffusion_steps = 100;
    double learning_rate = 0.0025;
    Order order = Order::type_first;

    int width() const { return 4 * embed_dim; }

    void validate() const {
        require(embed_dim >= 1 && embed_dim % 2 == 0, "config: embed_dim must be even and >= 2");
        require(num_heads >= 1 && width() % num_heads == 0,
                "config: token width (4 x embed_dim) must be divisible by num_heads");
        require(num_layers >= 1, "config: num_layers must be >= 1");
        require(ff_dim >= 1, "config: ff_dim must be >= 1");
        require(num_types >= 1, "config: num_types must be >= 1");
        require(horizon >= 1, "config: horizon must be >= 1");
        require(diffusion_steps >= 2, "config: diffusion_steps must be >= 2");
        require(learning_rate > 0.0, "config: learning_rate must be > 0");
    }
};

} // namespace cdiff
