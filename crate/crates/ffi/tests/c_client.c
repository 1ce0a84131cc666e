#include <math.h>
#include <stdio.h>
#include "hqrl.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        HqrlStatus s_ = (call);                                             \
        if (s_ != HQRL_STATUS_OK) {                                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,               \
                    hqrl_last_error_message());                             \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    HqrlNetwork *net = NULL;
    CHECK(hqrl_network_new(4, 1, 4, HQRL_OUTPUT_KIND_DISCRETE, 2, 7, &net));
    size_t quantum = 0, total = 0;
    CHECK(hqrl_network_param_counts(net, &quantum, &total));
    if (quantum != 24 || total != 32) return 2;

    double state[4] = {0.01, -0.02, 0.03, 0.04};
    double logits[2];
    CHECK(hqrl_network_forward(net, state, 1, 4, logits, 2));
    if (!isfinite(logits[0]) || !isfinite(logits[1])) return 3;

    if (hqrl_network_forward(net, state, 1, 4, logits, 1) != HQRL_STATUS_BUFFER_TOO_SMALL) return 4;
    if (hqrl_last_error_message() == NULL) return 5;
    hqrl_network_free(net);

    HqrlEnv *env = NULL;
    CHECK(hqrl_env_new("CartPole-v1", &env));
    double obs[4];
    CHECK(hqrl_env_reset(env, 0, obs, 4));
    HqrlStep step;
    double total_reward = 0.0;
    do {
        CHECK(hqrl_env_step_discrete(env, 1, obs, 4, &step));
        total_reward += step.reward;
    } while (!step.terminated && !step.truncated);
    hqrl_env_free(env);
    if (total_reward < 1.0 || total_reward > 100.0) return 6;

    size_t passed = 0, rows = 0;
    CHECK(hqrl_verify_tables(&passed, &rows));
    printf("%s %zu/%zu %.0f\n", hqrl_version(), passed, rows, total_reward);
    return 0;
}
