import { ApiClient } from "./api.js";
import { StudyApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
const app = new StudyApp(root, new ApiClient(""));
app.start();
